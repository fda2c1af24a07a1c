"""Floquet-Bloch fibers L_xi = -(d/dy + i xi) a (d/dy + i xi) on the unit cell.

Galerkin matrices live on the trigonometric basis exp(2 pi i k y), |k| <= K:

    M_pq = (2 pi p + xi) ahat_{p-q} (2 pi q + xi).

The ground eigenvalue behaves like xi^2 and loses relative accuracy in a
direct eigensolve, so it is computed from the inverse
G^{-1} A^{-1} G^{-1} (G = diag(2 pi k + xi)) whose top eigenvalue is
1 / lambda. Higher bands stay away from zero and come from the direct
solve. At xi = 0 the constant mode decouples with lambda = 0 and the rest
is solved on k != 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cell import CellGrid, CoefficientField
from .effective import Impulse, duhamel
from .fine_solver import ModalField

DEFAULT_K = 32
DEFAULT_MODES = 12


class DegenerateGroundState(RuntimeError):
    """Gap between the two lowest Bloch eigenvalues below threshold."""


class ModeTruncationWarning(UserWarning):
    """Highest retained Bloch bands still carry a noticeable share of the solution."""


def coefficient_modes(a_samples: np.ndarray, kmax: int) -> np.ndarray:
    """Fourier coefficients c_m, |m| <= kmax, of a(y) = sum c_m exp(2 pi i m y).

    Nodes start at y = -1/2, hence the factor (-1)^m relative to the raw FFT.
    """
    N = a_samples.size
    if 2 * kmax + 1 > N:
        raise ValueError("cell grid too coarse for the requested truncation")
    ah = np.fft.fft(a_samples) / N
    m = np.arange(-kmax, kmax + 1)
    return ah[m % N] * (-1.0) ** m


@dataclass(frozen=True)
class FiberedOperator:
    xi: float
    K: int
    matrix: np.ndarray

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)


@dataclass(frozen=True)
class BlochMode:
    eigenvalue: float
    coeffs: np.ndarray
    K: int
    gap: float = np.nan

    def values(self, grid: CellGrid) -> np.ndarray:
        ks = np.arange(-self.K, self.K + 1)
        return np.exp(2j * np.pi * np.outer(grid.nodes, ks)) @ self.coeffs

    @property
    def mean(self) -> complex:
        return complex(self.coeffs[self.K])


class BlochSolver:
    """Cached Galerkin data for one coefficient field; thread-safe after construction."""

    def __init__(self, a, K: int = DEFAULT_K, grid: CellGrid | None = None):
        self.grid = CellGrid() if grid is None else grid
        self.a = a.sample(self.grid) if isinstance(a, CoefficientField) else np.asarray(a, float)
        self.K = K
        self.ks = np.arange(-K, K + 1)
        c = coefficient_modes(self.a, 2 * K)
        idx = self.ks[:, None] - self.ks[None, :] + 2 * K
        self.A = c[idx]
        self.Ainv = np.linalg.inv(self.A)
        self._E = np.exp(2j * np.pi * np.outer(self.grid.nodes, self.ks))

    def assemble(self, xi: float) -> FiberedOperator:
        g = 2 * np.pi * self.ks + xi
        return FiberedOperator(xi, self.K, g[:, None] * self.A * g[None, :])

    def modes(self, xi: float, M: int = DEFAULT_MODES) -> tuple:
        """Lowest M eigenpairs (nu ascending, coefficient columns with unit L2(Q) norm)."""
        if abs(xi) < 1e-150:
            xi = 0.0  # lambda ~ xi^2 underflows anyway
        g = 2 * np.pi * self.ks + xi
        if xi == 0.0:
            nz = self.ks != 0
            Ainv = np.linalg.inv(self.A[np.ix_(nz, nz)])
            ag = np.abs(g[nz])
            Kmat = Ainv / ag[:, None] / ag[None, :]
            w, V = np.linalg.eigh((Kmat + Kmat.conj().T) / 2)
            w, V = w[::-1][: M - 1], V[:, ::-1][:, : M - 1]
            full = np.zeros((self.ks.size, M), dtype=complex)
            full[self.K, 0] = 1.0
            full[nz, 1:] = V * (ag / (1j * g[nz]))[:, None]
            nu = np.concatenate([[0.0], 1 / w])
            return nu, full / np.linalg.norm(full, axis=0)
        ag = np.abs(g)
        sc = ag / ag.min()  # rescaled so entries stay finite for tiny xi
        Kmat = self.Ainv / sc[:, None] / sc[None, :]
        w, V = np.linalg.eigh((Kmat + Kmat.conj().T) / 2)
        v0 = V[:, -1] * ag / (1j * g)
        # upper bands are separated from zero, so the direct solve is accurate there;
        # taking them from the inverse form fails once |xi| is tiny (dynamic range 1/xi^2)
        Mx = self.assemble(xi).matrix
        wm, Vm = np.linalg.eigh((Mx + Mx.conj().T) / 2)
        nu = np.concatenate([[ag.min() ** 2 / w[-1]], wm[1:M]])
        V = np.column_stack([v0, Vm[:, 1:M]])
        return nu, V / np.linalg.norm(V, axis=0)

    def ground_state(self, xi: float, gap_min: float = 1e-8) -> BlochMode:
        nu, V = self.modes(xi, 2)
        gap = float(nu[1] - nu[0])
        if gap < gap_min:
            raise DegenerateGroundState(f"gap {gap:.2e} at xi={xi}")
        v = V[:, 0]
        # phase convention: real positive mean
        m = v[self.K]
        if abs(m) > 0:
            v = v * abs(m) / m
        return BlochMode(float(nu[0]), v, self.K, gap)

    def cell_values(self, coeffs: np.ndarray) -> np.ndarray:
        return self._E @ coeffs

    def cell_derivative(self, coeffs: np.ndarray) -> np.ndarray:
        return self._E @ (2j * np.pi * self.ks * coeffs)


def assemble(a, xi: float, K: int = DEFAULT_K) -> FiberedOperator:
    return BlochSolver(a, K).assemble(xi)


def ground_state(a, xi: float, K: int = DEFAULT_K) -> BlochMode:
    return BlochSolver(a, K).ground_state(xi)


def taylor_residual(solver: BlochSolver, b: np.ndarray, ell: int, xis=None) -> tuple:
    """(slope, xis, residuals) of |lambda_xi - sum_{n<=ell} lambda^n xi^n| over small xi.

    Points within 10x of the eigenvalue's relative-precision floor are
    dropped before the log-log fit.
    """
    from .spectral_hierarchy import lambda_taylor

    xis = np.logspace(-3, -1, 15) if xis is None else np.asarray(xis, float)
    lam = np.array([solver.ground_state(x).eigenvalue for x in xis])
    r = np.abs(lam - lambda_taylor(b, xis, ell))
    keep = r > 10 * 1e-15 * np.abs(lam) * np.sqrt(solver.ks.size)
    if keep.sum() < 3:
        return np.nan, xis, r
    slope = np.polyfit(np.log(xis[keep]), np.log(r[keep]), 1)[0]
    return float(slope), xis, r


def bloch_duhamel(
    solver: BlochSolver,
    eps: float,
    f: Impulse,
    t: float,
    M_modes: int = DEFAULT_MODES,
    tail_tol: float = 1e-8,
) -> ModalField:
    """Exact solution of the heterogeneous wave equation, mode by mode.

    For each mode xi of f2, expand the constant 1 in the Bloch basis of
    L_{eps xi}; band j oscillates at sqrt(nu_j)/eps and carries the weight
    conj(v_j[k=0]). The s-integral against f1 is the Duhamel quadrature.
    """
    nx = f.xis.size
    N = solver.grid.N
    W = np.zeros((nx, N), dtype=complex)
    dW = np.zeros_like(W)
    Wy = np.zeros_like(W)
    tail = 0.0
    for n, (xi, fh) in enumerate(zip(f.xis, f.f2hat)):
        nu, V = solver.modes(eps * xi, M_modes)
        omega = np.sqrt(np.maximum(nu, 0.0)) / eps
        I, dI = duhamel(omega, t, f.f1)[0]
        proj = np.conj(V[solver.K, :]) * fh
        W[n] = solver.cell_values(V @ (I * proj))
        dW[n] = solver.cell_values(V @ (dI * proj))
        Wy[n] = solver.cell_derivative(V @ (I * proj))
        tail = max(tail, float(np.max(np.abs(dI[-2:] * proj[-2:]))))
    if tail > tail_tol:
        warnings.warn(f"Bloch truncation tail {tail:.2e} above {tail_tol:.0e}", ModeTruncationWarning, stacklevel=2)
    return ModalField(eps, f.xis.copy(), W, dW, Wy)
