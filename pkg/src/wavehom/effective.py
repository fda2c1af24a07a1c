"""Dispersive effective equations solved mode by mode in Fourier space.

Every effective equation in the package has the per-mode form

    u''(t) + mu(xi) u(t) = sum_j s_j(xi) f1^{(j)}(t)

on the modes xi of a band-limited impulse f(t, x) = f1(t) f2(x), so the
solution is a sum of Duhamel integrals of derivatives of the time profile.
Higher time derivatives of u come from the ODE itself rather than from
differencing:

    d_t^{2j} u   = (-mu)^j u  + sum_{i<j} (-mu)^i G^{(2(j-1-i))}
    d_t^{2j+1} u = (-mu)^j u' + sum_{i<j} (-mu)^i G^{(2(j-1-i)+1)}

where G is the right-hand side.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize_scalar

GL_NODES = 20
QUAD_TOL = 1e-10


class IllPosedSymbol(ValueError):
    """Effective symbol is not positive on the band of the impulse."""


class QuadratureFailure(RuntimeError):
    """Time quadrature did not settle under panel doubling."""


class InsufficientTimeDerivatives(ValueError):
    """Requested a derivative of the time profile beyond what it provides."""


@lru_cache(maxsize=None)
def _bump_polys(kmax: int) -> tuple:
    # d^k/dtau^k exp(-1/(1-tau^2)) = P_k(tau) / (1-tau^2)^{2k} exp(-1/(1-tau^2))
    w = np.array([1.0, 0.0, -1.0])
    w2 = P.polymul(w, w)
    tau = np.array([0.0, 1.0])
    polys = [np.array([1.0])]
    for k in range(kmax):
        p = polys[-1]
        new = P.polymul(P.polyder(p), w2) if p.size > 1 else np.zeros(1)
        new = P.polyadd(new, 4 * k * P.polymul(tau, P.polymul(p, w)))
        new = P.polysub(new, 2 * P.polymul(tau, p))
        polys.append(new)
    return tuple(polys)


@dataclass(frozen=True)
class Bump:
    """C-infinity time profile exp(-1/(1 - tau^2)) on [t0, t0 + width], tau mapped to (-1, 1)."""

    t0: float = 0.0
    width: float = 1.0
    kmax: int = 24

    @property
    def support(self) -> tuple:
        return (self.t0, self.t0 + self.width)

    def __call__(self, t, order: int = 0):
        if order > self.kmax:
            raise InsufficientTimeDerivatives(f"order {order} > kmax {self.kmax}")
        t = np.asarray(t, dtype=float)
        tau = 2 * (t - self.t0) / self.width - 1
        out = np.zeros_like(tau)
        inside = np.abs(tau) < 1
        tt = tau[inside]
        w = 1 - tt**2
        poly = _bump_polys(self.kmax)[order]
        out[inside] = P.polyval(tt, poly) / w ** (2 * order) * np.exp(-1 / w) * (2 / self.width) ** order
        return out

    def l1(self) -> float:
        x, wts = np.polynomial.legendre.leggauss(200)
        s = self.t0 + self.width * (x + 1) / 2
        return float(np.abs(self(s)) @ wts * self.width / 2)


@dataclass(frozen=True)
class Impulse:
    """Separable impulse f1(t) f2(x) with f2 = sum_k f2hat_k exp(i xi_k x) on the torus [-L, L).

    The spectrum is Hermitian (f2 is real) and carries no mean mode.
    """

    f1: Bump
    xis: np.ndarray
    f2hat: np.ndarray
    L: float
    R: float

    @classmethod
    def band_limited(cls, L: float = 8.0, R: float = 4.0, seed: int = 0, amplitude: float = 1.0, f1: Bump | None = None):
        rng = np.random.default_rng(seed)
        k = np.arange(1, int(np.ceil(R * L / np.pi)) + 1)
        xi = np.pi * k / L
        keep = xi < R
        xi = xi[keep]
        env = amplitude * np.exp(-1 / (1 - (xi / R) ** 2))
        half = env * np.exp(2j * np.pi * rng.random(xi.size))
        xis = np.concatenate([-xi[::-1], xi])
        f2hat = np.concatenate([np.conj(half[::-1]), half])
        return cls(Bump() if f1 is None else f1, xis, f2hat, float(L), float(R))

    @classmethod
    def single_mode(cls, xi: float, L: float = 8.0, amp: complex = 1.0, f1: Bump | None = None):
        return cls(Bump() if f1 is None else f1, np.array([float(xi)]), np.array([complex(amp)]), float(L), abs(xi))

    def scaled(self, factor: float) -> "Impulse":
        return Impulse(self.f1, self.xis, self.f2hat * factor, self.L, self.R)

    def f2(self, x):
        x = np.asarray(x, dtype=float)
        return (np.exp(1j * np.outer(x, self.xis)) @ self.f2hat).real

    def norm_f2(self) -> float:
        return float(np.sqrt(2 * self.L * np.sum(np.abs(self.f2hat) ** 2)))


def duhamel(omega, t: float, f1: Bump, orders=(0,), tol: float = QUAD_TOL, max_doublings: int = 8) -> dict:
    """int_0^t sin(omega (t-s))/omega f1^{(j)}(s) ds and its t-derivative, per order j.

    Composite Gauss-Legendre panels over supp f1 cut at t; the panel count
    starts from the oscillation scale and is doubled until two successive
    results differ by at most ``tol`` (relative to the size of the result,
    floored at one). Returns {j: (I, dI)} with arrays shaped like omega.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    lo, hi = f1.support
    T = min(t, hi)
    if T <= lo:
        z = np.zeros(omega.shape)
        return {j: (z.copy(), z.copy()) for j in orders}
    x, wts = np.polynomial.legendre.leggauss(GL_NODES)
    npan = max(8, int(np.ceil(omega.max() * (T - lo) / 3)) if omega.size else 8)

    def evaluate(npan):
        edges = np.linspace(lo, T, npan + 1)
        half = (edges[1:] - edges[:-1]) / 2
        s = ((edges[:-1] + edges[1:])[:, None] / 2 + half[:, None] * x).ravel()
        w = np.outer(half, wts).ravel()
        ph = np.outer(omega, t - s)
        with np.errstate(divide="ignore", invalid="ignore"):
            ker = np.where(omega[:, None] > 0, np.sin(ph) / omega[:, None], (t - s)[None, :])
        dker = np.cos(ph)
        out = {}
        for j in orders:
            fs = f1(s, j) * w
            out[j] = (ker @ fs, dker @ fs)
        return out

    prev = evaluate(npan)
    for _ in range(max_doublings):
        npan *= 2
        cur = evaluate(npan)
        gap = max(
            float(np.max(np.abs(cur[j][i] - prev[j][i]) / np.maximum(1.0, np.abs(cur[j][i]))))
            for j in orders
            for i in (0, 1)
        )
        if gap <= tol:
            return cur
        prev = cur
    raise QuadratureFailure(f"Duhamel quadrature gap {gap:.2e} after {max_doublings} doublings")


class Variant(enum.Enum):
    BASE = "base"
    FILTERED = "filter"
    REGULARIZED = "reg"
    BOUSSINESQ = "bsq"


def chi(eta):
    """Smooth cut-off: 1 on |eta| <= 1/2, 0 on |eta| >= 1."""
    r = np.abs(np.asarray(eta, dtype=float))
    out = np.where(r <= 0.5, 1.0, 0.0)
    mid = (r > 0.5) & (r < 1)
    s = 2 * r[mid] - 1
    out[mid] = np.exp(1 - 1 / (1 - s**2))
    return out


def symbol_poly(b, ell: int) -> np.ndarray:
    """Coefficients p_k of mu_base / xi^2 = sum_k p_k eta^k with eta = eps xi."""
    p = np.zeros(ell)
    for k in range(1, ell + 1):
        p[k - 1] = (b[k] * (1j) ** (k - 1)).real
    return p


def mu_base(b, ell: int, eps: float, xi):
    xi = np.asarray(xi, dtype=float)
    return xi**2 * P.polyval(eps * xi, symbol_poly(b, ell))


def _scan_max(func, hi: float = 1e3):
    # dense log scan over eta > 0 plus a bounded refinement around the best point
    etas = np.logspace(-4, np.log10(hi), 4000)
    vals = func(etas)
    i = int(np.argmax(vals))
    lo_, hi_ = etas[max(i - 1, 0)], etas[min(i + 1, etas.size - 1)]
    res = minimize_scalar(lambda e: -func(np.array([e]))[0], bounds=(lo_, hi_), method="bounded",
                          options={"xatol": 1e-14})
    return max(vals[i], -res.fun)


def kappa_reg(b, ell: int, lam: float) -> float:
    """Smallest kappa >= 0 with p(eta) + kappa |eta|^ell >= lam/2 for every real eta."""
    p = symbol_poly(b, ell)

    def need(eta):
        out = np.zeros_like(eta)
        for e in (eta, -eta):
            out = np.maximum(out, (lam / 2 - P.polyval(e, p)) / np.abs(e) ** ell)
        return out

    return float(max(0.0, _scan_max(need)))


def kappa_bsq(b, ell: int) -> np.ndarray:
    """kappa[1..ell] with kappa_1 = 1, kappa_even = 0, kappa_odd minimal keeping each numerator term >= 0."""
    kap = np.zeros(ell + 1)
    kap[1] = 1.0
    abar = b[1]
    for n in range(3, ell + 1, 2):
        # minimal kappa_n with kappa_n abar + sum >= 0 for both directions
        low = min(
            sum((kap[l] * b[n + 1 - l] * (1j * s) ** (n - l)).real for l in range(1, n))
            for s in (-1.0, 1.0)
        )
        kap[n] = max(0.0, -low / abar)
    return kap


def beta_bsq(kap, ell: int, eps: float, xi):
    r = eps * np.abs(np.asarray(xi, dtype=float))
    return 1 + sum(kap[l] * r ** (l - 1) for l in range(2, ell + 1))


def mu_bsq(b, kap, ell: int, eps: float, xi):
    xi = np.asarray(xi, dtype=float)
    r = eps * np.abs(xi)
    s = np.sign(xi)
    num = np.zeros_like(xi)
    for n in range(1, ell + 1):
        coef = kap[n] * b[1] + sum((kap[l] * b[n + 1 - l] * (1j * s) ** (n - l)).real for l in range(1, n))
        num = num + coef * r ** (n - 1)
    return xi**2 * num / beta_bsq(kap, ell, eps, xi)


@dataclass(frozen=True)
class EffectiveSymbolSpec:
    """Which effective symbol to use.

    ``b`` are the dispersive coefficients (spectral or revamped), ``lam`` the
    ellipticity constant of the medium. ``c`` optionally holds the revamped
    source coefficients; when present the source is the modified one.
    """

    ell: int
    eps: float
    b: np.ndarray
    lam: float
    variant: Variant = Variant.BASE
    alpha: float = 0.5
    c: dict | None = None
    abar_nm: dict | None = field(default=None, repr=False)

    def mu(self, xi):
        v = self.variant
        if v in (Variant.BASE, Variant.FILTERED):
            return mu_base(self.b, self.ell, self.eps, xi)
        if v is Variant.REGULARIZED:
            kap = kappa_reg(self.b, self.ell, self.lam)
            xi = np.asarray(xi, dtype=float)
            return mu_base(self.b, self.ell, self.eps, xi) + kap * (self.eps * np.abs(xi)) ** self.ell * xi**2
        kap = kappa_bsq(self.b, self.ell)
        return mu_bsq(self.b, kap, self.ell, self.eps, xi)


def geometric_rhs(f: Impulse, c: dict, ell: int, eps: float) -> dict:
    """Per-mode modified source {time order j: multiplier of f1^{(j)}}.

    Adds sum_p eps^{p+1} c[p][j] (i xi)^{p+1-j} d_t^j f to f for p <= ell - 2.
    """
    src = {0: f.f2hat.astype(complex)}
    for p, terms in c.items():
        if p > ell - 2:
            continue
        for j, cp in terms.items():
            if j > f.f1.kmax:
                raise InsufficientTimeDerivatives(f"source needs d_t^{j} f1")
            src[j] = src.get(j, 0) + cp * eps ** (p + 1) * (1j * f.xis) ** (p + 1 - j) * f.f2hat
    return src


@dataclass(frozen=True)
class ModeSolution:
    """u(t, xi) and d_t u on a time list for every mode of an impulse."""

    xis: np.ndarray
    mu: np.ndarray
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray
    source: dict
    f1: Bump

    def G(self, k: int) -> np.ndarray:
        """k-th time derivative of the right-hand side, shape (nt, nxi)."""
        out = np.zeros((self.t.size, self.xis.size), dtype=complex)
        for j, s in self.source.items():
            out = out + np.outer(self.f1(self.t, j + k), s)
        return out

    def dt(self, order: int) -> np.ndarray:
        if order == 0:
            return self.u
        if order == 1:
            return self.du
        j, odd = divmod(order, 2)
        nmu = -self.mu[None, :]
        out = nmu**j * (self.du if odd else self.u)
        for i in range(j):
            out = out + nmu**i * self.G(2 * (j - 1 - i) + odd)
        return out

    def l2(self, values: np.ndarray, L: float) -> np.ndarray:
        """Torus L2 norm per time of a field given by its mode amplitudes."""
        return np.sqrt(2 * L * np.sum(np.abs(values) ** 2, axis=-1))


def solve_modes(xis, mu, source: dict, f1: Bump, t_list, tol: float = QUAD_TOL) -> ModeSolution:
    xis = np.asarray(xis, dtype=float)
    mu = np.asarray(mu, dtype=float)
    t = np.atleast_1d(np.asarray(t_list, dtype=float))
    omega = np.sqrt(np.maximum(mu, 0.0))
    u = np.zeros((t.size, xis.size), dtype=complex)
    du = np.zeros_like(u)
    orders = tuple(sorted(source))
    for i, ti in enumerate(t):
        res = duhamel(omega, ti, f1, orders, tol)
        for j in orders:
            u[i] += res[j][0] * source[j]
            du[i] += res[j][1] * source[j]
    return ModeSolution(xis, mu, t, u, du, dict(source), f1)


def solve_effective(spec: EffectiveSymbolSpec, f: Impulse, t_list, tol: float = QUAD_TOL) -> ModeSolution:
    mu = np.asarray(spec.mu(f.xis), dtype=float)
    if spec.c is not None:
        source = geometric_rhs(f, spec.c, spec.ell, spec.eps)
    else:
        source = {0: f.f2hat.astype(complex)}
    if spec.variant is Variant.FILTERED:
        filt = chi(spec.eps**spec.alpha * f.xis)
        source = {j: s * filt for j, s in source.items()}
    # modes the (filtered) source never excites stay at zero whatever the symbol
    active = np.any([np.abs(s) > 0 for s in source.values()], axis=0)
    if np.any(mu[active] <= 0):
        raise IllPosedSymbol(
            f"{spec.variant.value} symbol is not positive on the band (eps R = {spec.eps * f.R:.3g})"
        )
    return solve_modes(f.xis, mu, source, f.f1, t_list, tol)


def variant_compare(b, lam: float, ell: int, eps: float, f: Impulse, t_list, alpha: float = 0.5) -> dict:
    """Pairwise torus L2 distances between the four variants, per time."""
    sols = {}
    for v in Variant:
        spec = EffectiveSymbolSpec(ell, eps, np.asarray(b), lam, v, alpha)
        sols[v] = solve_effective(spec, f, t_list)
    out = {}
    names = list(Variant)
    for i, v in enumerate(names):
        for w in names[i + 1:]:
            out[(v.value, w.value)] = sols[v].l2(sols[v].u - sols[w].u, f.L)
    return out
