"""Leading-order versus dispersive homogenization over long times.

A localized pulse travels through the periodic medium with eps = 1/8, up
to t = 64 = eps^-2, where dispersion becomes visible. Both two-scale
expansions are compared with the exact Bloch solution in the energy norm
on the torus [-8, 8). The error grows at most linearly in t for both, and
the dispersive model (ell = 3) stays about a hundred times more accurate
than the plain homogenized one (ell = 1).
"""

from wavehom.harness import Context, ExperimentConfig

eps = 1 / 8
times = [2, 8, 32, 64]
ctx = Context(ExperimentConfig(eps_list=[eps], ell=[1, 3], t_list=times))

print(f"eps = {eps}")
print("    t    err(ell=1)   err(ell=3)")
e1 = ctx.errors("spectral", 1, eps, times)
e3 = ctx.errors("spectral", 3, eps, times)
for (t, _, a), (_, _, b) in zip(e1, e3):
    print(f"  {t:4.0f}   {a:.3e}    {b:.3e}")
