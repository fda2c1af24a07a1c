"""Two-scale expansions built from correctors and effective mode solutions.

Spectral expansion, per mode xi of the data (gamma = gamma_ell(eps xi)):

    S = sum_{n<=ell} eps^n psi_n(y) gamma (i xi)^n u
      + eps^3 sum_m (-1)^m eps^{2m} sum_n eps^n zeta_{n,m}(y) gamma (i xi)^{n+1} d_t^{2m} f

Hyperbolic expansion:

    H = sum_{n+m<=ell} eps^{n+m} phi_{n,m}(y) (i xi)^n d_t^m v

Everything is kept as cell profiles per mode (``ModalField``); the line
grid is only used for pointwise output. The residual identities are written
for one mode with the time dependence passed in as callables k -> d_t^k of
the effective solution and of the source, so the same code checks a single
plane wave exp(i xi x + i omega t) and a full time-dependent solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import CellGrid
from .effective import Impulse, ModeSolution
from .fine_solver import GridMismatch, LineDomain, ModalField, WaveState
from .hyperbolic_hierarchy import HyperbolicCorrectors
from .spectral_hierarchy import SpectralCorrectors


class MissingCorrector(KeyError):
    """Expansion order exceeds the corrector build."""


@dataclass(frozen=True)
class ExpansionField:
    t: float
    modal: ModalField
    ell: int
    kind: str
    variant: str = "base"

    def on_line(self, domain: LineDomain, grid: CellGrid) -> tuple:
        return domain.modulate(self.modal, grid)


def _time_index(modes: ModeSolution, t: float) -> int:
    hits = np.flatnonzero(np.abs(modes.t - t) < 1e-12)
    if hits.size == 0:
        raise GridMismatch(f"mode solution has no time {t}")
    return int(hits[0])


def _zeta_pairs(corr: SpectralCorrectors, ell: int):
    return [(n, m) for (n, m) in corr.zeta if n + 2 * m <= ell - 3]


def spectral_mode(corr: SpectralCorrectors, ell: int, eps: float, xi: float, dt_u, dt_f, order: int = 0):
    """Cell profile of d_t^order S and of its y-derivative for one mode."""
    if ell > corr.ell:
        raise MissingCorrector(f"spectral correctors built to {corr.ell} < {ell}")
    grid = corr.grid
    gam = corr.gamma(eps * xi, ell)
    ix = 1j * xi
    W = np.zeros(grid.N, dtype=complex)
    Wy = np.zeros(grid.N, dtype=complex)
    u = dt_u(order)
    for n in range(ell + 1):
        c = eps**n * gam * ix**n * u
        W += c * corr.psi[n]
        Wy += c * grid.grad(corr.psi[n])
    for n, m in _zeta_pairs(corr, ell):
        c = eps ** (3 + 2 * m + n) * (-1) ** m * gam * ix ** (n + 1) * dt_f(2 * m + order)
        W += c * corr.zeta[(n, m)]
        Wy += c * grid.grad(corr.zeta[(n, m)])
    return W, Wy


def hyperbolic_mode(hc: HyperbolicCorrectors, ell: int, eps: float, xi: float, dt_v, order: int = 0):
    if ell > hc.ell:
        raise MissingCorrector(f"hyperbolic correctors built to {hc.ell} < {ell}")
    grid = hc.grid
    W = np.zeros(grid.N, dtype=complex)
    Wy = np.zeros(grid.N, dtype=complex)
    for n in range(ell + 1):
        for m in range(0, ell + 1 - n, 2):  # phi vanishes for odd m
            if (n, m) == (0, 0):
                W += dt_v(order)
                continue
            c = eps ** (n + m) * (1j * xi) ** n * dt_v(m + order)
            W += c * hc.phi[(n, m)]
            Wy += c * grid.grad(hc.phi[(n, m)])
    return W, Wy


def _mode_callables(modes: ModeSolution, it: int, k: int):
    cache = {}

    def dt_u(order):
        if order not in cache:
            cache[order] = modes.dt(order)[it, k]
        return cache[order]

    def dt_f(order):
        return sum(s[k] * modes.f1(modes.t[it : it + 1], j + order)[0] for j, s in modes.source.items())

    return dt_u, dt_f


def _impulse_dt(f: Impulse, t: float, k: int):
    return lambda order: f.f2hat[k] * f.f1(np.array([t]), order)[0]


def assemble_S(ell: int, eps: float, corr: SpectralCorrectors, modes: ModeSolution, f: Impulse, t: float) -> ExpansionField:
    it = _time_index(modes, t)
    N = corr.grid.N
    nx = modes.xis.size
    W = np.zeros((nx, N), dtype=complex)
    dW, Wy = np.zeros_like(W), np.zeros_like(W)
    for k, xi in enumerate(modes.xis):
        dt_u, _ = _mode_callables(modes, it, k)
        dt_f = _impulse_dt(f, t, k)
        W[k], Wy[k] = spectral_mode(corr, ell, eps, xi, dt_u, dt_f, 0)
        dW[k], _ = spectral_mode(corr, ell, eps, xi, dt_u, dt_f, 1)
    return ExpansionField(t, ModalField(eps, modes.xis.copy(), W, dW, Wy), ell, "spectral")


def assemble_H(ell: int, eps: float, hc: HyperbolicCorrectors, modes: ModeSolution, t: float) -> ExpansionField:
    it = _time_index(modes, t)
    N = hc.grid.N
    nx = modes.xis.size
    W = np.zeros((nx, N), dtype=complex)
    dW, Wy = np.zeros_like(W), np.zeros_like(W)
    for k, xi in enumerate(modes.xis):
        dt_v, _ = _mode_callables(modes, it, k)
        W[k], Wy[k] = hyperbolic_mode(hc, ell, eps, xi, dt_v, 0)
        dW[k], _ = hyperbolic_mode(hc, ell, eps, xi, dt_v, 1)
    return ExpansionField(t, ModalField(eps, modes.xis.copy(), W, dW, Wy), ell, "hyperbolic")


def error_norms(reference, approx: ExpansionField, domain: LineDomain | None = None, grid: CellGrid | None = None,
                L: float | None = None) -> tuple:
    """(L2 error, energy-norm error) of an expansion against a reference.

    The reference is either a ``ModalField`` on the same modes (torus norms by
    Parseval, needs ``L``) or a fine-solver ``WaveState`` (needs ``domain``
    and the cell ``grid`` used by the correctors).
    """
    if isinstance(reference, ModalField):
        if L is None:
            raise ValueError("torus half-length L needed for modal norms")
        return (reference - approx.modal).norms(L)
    if isinstance(reference, WaveState):
        if domain is None or grid is None:
            raise ValueError("line domain and cell grid needed for grid norms")
        if abs(reference.t - approx.t) > 1e-12 or reference.u.size != domain.M:
            raise GridMismatch("reference state and expansion differ in time or grid")
        u, du, _ = approx.on_line(domain, grid)
        e = reference.u - u
        ev = reference.v - du
        ex = domain.deriv(e)
        return domain.l2(e), float(np.sqrt(domain.l2(ev) ** 2 + domain.l2(ex) ** 2))
    raise TypeError(f"unsupported reference {type(reference).__name__}")


def _D(grid: CellGrid, eps: float, xi: float, G: np.ndarray) -> np.ndarray:
    # x-derivative of exp(i xi x) G(x/eps), as a cell profile
    return 1j * xi * G + grid.grad(G) / eps


def spectral_lhs(corr: SpectralCorrectors, ell: int, eps: float, xi: float, dt_u, dt_f) -> np.ndarray:
    """(d_t^2 - d_x a(x/eps) d_x) S - f as a cell profile for one mode."""
    grid, a = corr.grid, corr.a
    S, _ = spectral_mode(corr, ell, eps, xi, dt_u, dt_f, 0)
    S2, _ = spectral_mode(corr, ell, eps, xi, dt_u, dt_f, 2)
    return S2 - _D(grid, eps, xi, grid.product(a, _D(grid, eps, xi, S))) - dt_f(0)


def spectral_terms(corr: SpectralCorrectors, ell: int, eps: float, xi: float, dt_u, dt_f) -> dict:
    """The nine remainder terms whose sum equals ``spectral_lhs`` identically.

    T1 is the constant cross-moment term, T2..T5 involve the last corrector
    and its flux and auxiliary correctors, T6 the leftover products psi b,
    and T7..T9 the source correctors and their fluxes.
    """
    grid, a = corr.grid, corr.a
    N = grid.N
    gam = corr.gamma(eps * xi, ell)
    ix = 1j * xi
    D = lambda G: _D(grid, eps, xi, G)
    mul = grid.product
    w = dt_u(0)
    f0 = dt_f(0)
    zero = np.zeros(N)
    psi, b = corr.psi, corr.b
    sig = corr.sigma[ell]
    rho = corr.rho.get(ell, zero)

    def z(n, m):
        return corr.zeta.get((n, m), zero)

    def tau(n, m):
        if n + 2 * m > ell - 3 or (m == 0 and n < 0):
            return zero
        return corr.tau[(n, m)]

    T = {}
    t1 = 0.0
    for n in range(ell, 2 * ell + 1):
        for k in range(max(n - ell, 1), min(ell, n - 1) + 1):
            t1 -= eps**n * (-1) ** (n - k) * np.mean(psi[n - k] * psi[k]) * gam * ix**n * f0
    T["T1"] = np.full(N, t1, dtype=complex)
    T["T2"] = -(eps**ell) * D(rho * gam * ix ** (ell - 1) * f0) if ell >= 2 else np.zeros(N, complex)
    T["T3"] = -(eps**ell) * D((mul(a, psi[ell]) - sig) * gam * ix ** (ell + 1) * w)
    T["T4"] = eps**ell * (psi[ell] + rho) * gam * ix**ell * f0
    T["T5"] = -(eps**ell) * sig * gam * ix ** (ell + 2) * w
    t6 = np.zeros(N, complex)
    for n in range(1, ell + 1):
        for k in range(ell + 2 - n, ell + 2):
            t6 += eps ** (n + k - 2) * psi[n] * b[k - 1] * gam * ix ** (n + k) * w
    T["T6"] = t6
    t7 = np.zeros(N, complex)
    t8 = np.zeros(N, complex)
    t9 = np.zeros(N, complex)
    for m in range((ell - 2) // 2 + 1) if ell >= 2 else []:
        n = ell - 3 - 2 * m
        fm = dt_f(2 * m)
        t7 -= eps**ell * (-1) ** m * D((mul(a, z(n, m)) - tau(n, m)) * gam * ix ** (ell - 1 - 2 * m) * fm)
        t8 -= eps**ell * (-1) ** m * tau(n, m) * gam * ix ** (ell - 2 * m) * fm
    for m in range((ell - 3) // 2 + 1) if ell >= 3 else []:
        n = ell - 3 - 2 * m
        t9 += eps**ell * (-1) ** m * z(n, m) * gam * ix ** (ell - 2 - 2 * m) * dt_f(2 * m + 2)
    T["T7"], T["T8"], T["T9"] = t7, t8, t9
    return T


def hyperbolic_lhs(hc: HyperbolicCorrectors, ell: int, eps: float, xi: float, dt_v, dt_f) -> np.ndarray:
    grid, a = hc.grid, hc.a
    H, _ = hyperbolic_mode(hc, ell, eps, xi, dt_v, 0)
    H2, _ = hyperbolic_mode(hc, ell, eps, xi, dt_v, 2)
    return H2 - _D(grid, eps, xi, grid.product(a, _D(grid, eps, xi, H))) - dt_f(0)


def geometric_source(hc: HyperbolicCorrectors, ell: int, eps: float, xi: float, dt_v):
    """d_t^k of the source for which v solves the geometric effective equation exactly."""
    ix = 1j * xi

    def dt_f(k):
        out = dt_v(k + 2)
        for (n, m), ab in hc.abar.items():
            if n + m <= ell:
                out = out - ab * eps ** (n - 1 + m) * ix ** (n + 1) * dt_v(m + k)
        return out

    return dt_f


def hyperbolic_terms(hc: HyperbolicCorrectors, ell: int, eps: float, xi: float, dt_v) -> dict:
    """Total-derivative remainder terms whose sum equals ``hyperbolic_lhs`` under the geometric source."""
    grid, a = hc.grid, hc.a
    N = grid.N
    ix = 1j * xi
    zero = np.zeros(N)
    sig = lambda n, m: hc.sigma_h.get((n, m), zero) if n >= 0 else zero
    phi = lambda n, m: hc.phi.get((n, m), zero)
    space = np.zeros(N, complex)
    for n in range(ell + 1):
        G = (grid.product(a, phi(n, ell - n)) - sig(n, ell - n)) * ix ** (n + 1) * dt_v(ell - n)
        space -= eps**ell * _D(grid, eps, xi, G)
    time = np.zeros(N, complex)
    for n in range(1, ell + 1):
        time += eps**ell * (
            phi(n, ell - n) * ix**n * dt_v(ell + 2 - n) - sig(n - 1, ell + 1 - n) * ix ** (n + 1) * dt_v(ell + 1 - n)
        )
    return {"space": space, "time": time}


def plane_wave(omega: float, source_symbol: float | None = None):
    """Callables for w = exp(i omega t) at t = 0; the source is (symbol - omega^2) w."""
    io = 1j * omega
    dt_w = lambda k: io**k
    if source_symbol is None:
        return dt_w
    return dt_w, lambda k: io**k * (source_symbol - omega**2)


def hminus1(grid: CellGrid, eps: float, xi: float, R: np.ndarray) -> float:
    """Squared H^{-1} norm density of exp(i xi x) R(x/eps) per unit length."""
    Rh = np.fft.fft(R) / grid.N
    freq = xi + grid.wavenumbers / eps
    return float(np.sum(np.abs(Rh) ** 2 / (1 + freq**2)))


def residual_spectral(corr: SpectralCorrectors, ell: int, eps: float, modes: ModeSolution, f: Impulse, t: float) -> dict:
    """Residual of S applied to the heterogeneous operator, with per-term sizes.

    Returns {'total': H^{-1} norm of the residual, 'identity': H^{-1} norm of
    residual minus the sum of terms, 'T1'..'T9': their H^{-1} norms}.
    """
    it = _time_index(modes, t)
    grid = corr.grid
    acc = {}
    for k, xi in enumerate(modes.xis):
        dt_u, _ = _mode_callables(modes, it, k)
        dt_f = _impulse_dt(f, t, k)
        lhs = spectral_lhs(corr, ell, eps, xi, dt_u, dt_f)
        terms = spectral_terms(corr, ell, eps, xi, dt_u, dt_f)
        acc["total"] = acc.get("total", 0.0) + hminus1(grid, eps, xi, lhs)
        acc["identity"] = acc.get("identity", 0.0) + hminus1(grid, eps, xi, lhs - sum(terms.values()))
        for name, v in terms.items():
            acc[name] = acc.get(name, 0.0) + hminus1(grid, eps, xi, v)
    return {k: float(np.sqrt(2 * f.L * v)) for k, v in acc.items()}


def residual_hyperbolic(hc: HyperbolicCorrectors, ell: int, eps: float, modes: ModeSolution, f: Impulse, t: float) -> float:
    """H^{-1} norm of (d_t^2 - d_x a d_x) H - f for the revamped effective solution."""
    it = _time_index(modes, t)
    tot = 0.0
    for k, xi in enumerate(modes.xis):
        dt_v, _ = _mode_callables(modes, it, k)
        tot += hminus1(hc.grid, eps, xi, hyperbolic_lhs(hc, ell, eps, xi, dt_v, _impulse_dt(f, t, k)))
    return float(np.sqrt(2 * f.L * tot))
