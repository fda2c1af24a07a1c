"""The truncated dispersive symbol can go negative, and three ways to repair it.

For ell = 3 the symbol is xi^2 (b1 - b3 (eps xi)^2). Once eps |xi| exceeds
sqrt(b1 / b3) the equation is ill-posed. Filtering, regularization and
the Boussinesq form all stay positive and differ from each other only at
order eps^3 on band-limited data.
"""

import numpy as np

from wavehom.effective import (
    EffectiveSymbolSpec,
    IllPosedSymbol,
    Impulse,
    Variant,
    kappa_bsq,
    kappa_reg,
    solve_effective,
    variant_compare,
)
from wavehom.spectral_hierarchy import build_spectral
from wavehom.cell import sine_field

field = sine_field()
b = build_spectral(field, 3).b
print(f"symbol turns negative for eps |xi| > {np.sqrt(b[1] / b[3]):.2f}")
print(f"regularization kappa = {kappa_reg(b, 3, field.lam):.4e}, Boussinesq kappa_3 = {kappa_bsq(b, 3)[3]:.4e}")

f = Impulse.band_limited()
for v in Variant:
    try:
        solve_effective(EffectiveSymbolSpec(3, 8.0, b, field.lam, v), f, [1.0])
        print(f"  eps = 8: {v.value:6s} well-posed")
    except IllPosedSymbol:
        print(f"  eps = 8: {v.value:6s} ill-posed")

print("\npairwise L2 distance at t = 2")
for eps in (1 / 8, 1 / 16, 1 / 32):
    d = variant_compare(b, field.lam, 3, eps, f, [2.0])
    print(f"  eps = 1/{round(1 / eps):<3d} " + "  ".join(f"{a}-{c} {v[0]:.1e}" for (a, c), v in d.items()))
