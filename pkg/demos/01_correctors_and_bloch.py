"""Dispersive coefficients from the cell problem, checked against Bloch waves.

The medium is a(y) = 2 + sin(2 pi y). Its homogenized coefficient is the
harmonic mean sqrt(3); the next nonzero coefficient b3 sets how fast long
waves disperse. The lowest Bloch eigenvalue lambda(xi) must agree with
b1 xi^2 - b3 xi^4 + b5 xi^6 - ... for small xi.
"""

import numpy as np

from wavehom.bloch import BlochSolver
from wavehom.cell import sine_field
from wavehom.spectral_hierarchy import build_spectral, lambda_taylor

field = sine_field()
corr = build_spectral(field, 7)
print("dispersive coefficients b_n:")
for n in range(1, 8):
    print(f"  b[{n}] = {corr.b[n]: .10e}")
print(f"sqrt(3)  = {np.sqrt(3): .10e}")

bloch = BlochSolver(field)
print("\n   xi      lambda(xi)       |lambda - Taylor_ell| for ell = 2, 4, 6")
for xi in (0.4, 0.2, 0.1, 0.05):
    lam = bloch.ground_state(xi).eigenvalue
    errs = [abs(lam - lambda_taylor(corr.b, np.array([xi]), ell)[0]) for ell in (2, 4, 6)]
    print(f"  {xi:5.2f}  {lam:.12e}  " + "  ".join(f"{e:.2e}" for e in errs))
# halving xi divides the ell-truncation error by about 2^(ell+2)
