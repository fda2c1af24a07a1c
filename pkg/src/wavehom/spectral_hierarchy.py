"""Spectral (Taylor-Bloch) correctors and dispersive homogenized coefficients.

In one space dimension every symmetric n-tensor is a single number per cell
point, so the corrector families below are stored as plain arrays:

    psi[n]        order-n spectral corrector, psi[0] = 1
    b[n]          homogenized coefficient, b[1] = harmonic mean of a
    sigma[n]      flux corrector (gradient of a periodic potential)
    rho[n]        auxiliary corrector, n >= 2
    zeta[n, m]    source correctors, n + 2m <= ell - 3
    tau[n, m]     their flux correctors, including the n = -1 slot

Two independent routes compute the same objects. The real route strips the
powers of (i xi) off the recursion and tracks the resulting signs by hand.
The xi route solves the complex cell problems at a fixed wave number and is
used as an oracle: psi[n] (i xi)^n must reproduce its output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cell import (
    MIN_CORRECTOR_N,
    CellGrid,
    CoefficientField,
    check_compatible,
    solve_elliptic,
    solve_poisson,
)


def _zeros(grid: CellGrid, dtype=float) -> np.ndarray:
    return np.zeros(grid.N, dtype=dtype)


def _solve(grid, a, rhs, log, label, mean_target=0.0):
    ratio = check_compatible(rhs)
    if log is not None:
        log.append((label, ratio))
    return solve_elliptic(grid, a, rhs, mean_target)


def _poisson(grid, rhs, log, label):
    ratio = check_compatible(rhs)
    if log is not None:
        log.append((label, ratio))
    return solve_poisson(grid, rhs)


def build_psi_b(grid: CellGrid, a: np.ndarray, ell: int, log: list | None = None):
    """Real recursion for psi[0..ell] and b[1..ell] (b[0] is unused and 0).

    -(a psi_n')' = (a psi_{n-1})' + a (psi_{n-1}' + psi_{n-2}) - sum_{k=2}^n b_{k-1} psi_{n-k}
    b_{n-1}      = E[a (psi_{n-1}' + psi_{n-2})]
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    mul = grid.product
    psi = [np.ones(grid.N)]
    b = np.zeros(ell + 1)

    def prev2(n):
        return psi[n - 2] if n >= 2 else _zeros(grid)

    for n in range(1, ell + 1):
        p1 = psi[n - 1]
        flux = mul(a, grid.grad(p1) + prev2(n))
        if n >= 2:
            b[n - 1] = np.mean(flux)
        rhs = grid.grad(mul(a, p1)) + flux
        for k in range(2, n + 1):
            rhs = rhs - b[k - 1] * psi[n - k]
        psi.append(_solve(grid, a, rhs, log, f"psi{n}"))
    b[ell] = np.mean(mul(a, grid.grad(psi[ell]) + prev2(ell + 1)))
    return psi, b


def psi_xi(grid: CellGrid, a: np.ndarray, ell: int, xi: float, log: list | None = None):
    """Complex cell recursion at fixed xi; returns (psi_check[0..ell], lam_check[0..ell+1])."""
    mul = grid.product
    ix = 1j * xi
    pc = [np.ones(grid.N, dtype=complex)]
    lam = np.zeros(ell + 2, dtype=complex)
    zero = _zeros(grid, complex)
    for n in range(1, ell + 2):
        p1 = pc[n - 1]
        p2 = pc[n - 2] if n >= 2 else zero
        flux = ix * mul(a, grid.grad(p1) + ix * p2)
        lam[n] = -np.mean(flux)
        if n == ell + 1:
            break
        rhs = grid.grad(mul(a, ix * p1)) + flux
        for k in range(2, n + 1):
            rhs = rhs + lam[k] * pc[n - k]
        pc.append(_solve(grid, a, rhs, log, f"psi_xi{n}"))
    return pc, lam


def lambda_taylor(b: np.ndarray, xi, ell: int):
    """sum_{n<=ell} of the Taylor coefficients of the Bloch eigenvalue at xi."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi, dtype=complex)
    for n in range(2, ell + 1):
        out = out - b[n - 1] * (1j * xi) ** n
    return out.real


def build_flux_sigma(grid: CellGrid, a: np.ndarray, psi, b, log: list | None = None):
    """sigma[n] = Phi_n' with -Phi_n'' = a(psi_n' + psi_{n-1}) - sum_{k=2}^{n+1} b_{k-1} psi_{n+1-k}."""
    ell = len(psi) - 1
    sigma = []
    for n in range(ell + 1):
        prev = psi[n - 1] if n >= 1 else _zeros(grid)
        rhs = grid.product(a, grid.grad(psi[n]) + prev)
        for k in range(2, n + 2):
            rhs = rhs - b[k - 1] * psi[n + 1 - k]
        sigma.append(grid.grad(_poisson(grid, rhs, log, f"sigma{n}")))
    return sigma


def build_rho(grid: CellGrid, psi, log: list | None = None) -> dict:
    """rho[n] = Psi_n' with -Psi_n'' = psi_{n-1}, for 2 <= n <= ell."""
    return {n: grid.grad(_poisson(grid, psi[n - 1], log, f"rho{n}")) for n in range(2, len(psi))}


def zeta_indices(ell: int):
    """(n, m) pairs with n + 2m <= ell - 3, ordered so dependencies come first."""
    return [(n, m) for m in range(0, (ell - 3) // 2 + 1) for n in range(0, ell - 3 - 2 * m + 1)]


def build_zeta(grid: CellGrid, a: np.ndarray, psi, b, ell: int, log: list | None = None) -> dict:
    """Real recursion for zeta[n, m], n + 2m <= ell - 3.

    With zeta_check = zeta (i xi)^{n+1} and E[conj(psi_check^p) psi_check^q]
    = (-1)^p E[psi^p psi^q] (i xi)^{p+q}, the integration constants become

        m = 0:  E[zeta] = -sum_k sum_l (-1)^k (b_{l-1}/b_1) E[psi^{k+2-l} zeta^{n-k,0}]
        m >= 1: the same, minus (1/b_1) sum_k (-1)^{n-k} E[psi^{n+2-k} zeta^{k,m-1}]
    """
    mul = grid.product
    zeta: dict = {}
    abar = b[1]

    def z(n, m):
        return zeta.get((n, m), _zeros(grid))

    for n, m in zeta_indices(ell):
        z1, z2 = z(n - 1, m), z(n - 2, m)
        rhs = grid.grad(mul(a, z1)) + mul(a, grid.grad(z1) + z2)
        if m == 0:
            rhs = rhs - psi[n + 1]
            rhs = rhs + sum((-1) ** (n + 1 - k) * np.mean(psi[n + 1 - k] * psi[k]) for k in range(n + 2))
        else:
            rhs = rhs + z(n, m - 1)
        c = 0.0
        for k in range(1, n + 1):
            for l in range(2, k + 3):
                c -= (-1) ** k * b[l - 1] / abar * np.mean(psi[k + 2 - l] * z(n - k, m))
        if m >= 1:
            c -= sum((-1) ** (n - k) * np.mean(psi[n + 2 - k] * z(k, m - 1)) for k in range(n + 3)) / abar
        zeta[(n, m)] = _solve(grid, a, rhs, log, f"zeta{n},{m}", mean_target=c)
    return zeta


def zeta_xi(grid: CellGrid, a: np.ndarray, pc, lam, ell: int, xi: float, log: list | None = None) -> dict:
    """Complex cell problems for zeta_check[n, m] at fixed xi (oracle route).

    The integration constants are the conjugated ones of the source
    correctors, written with the ground-state Taylor coefficients pc and the
    eigenvalue coefficients lam returned by ``psi_xi``.
    """
    mul = grid.product
    ix = 1j * xi
    zc: dict = {}
    zero = _zeros(grid, complex)

    def z(n, m):
        return zc.get((n, m), zero)

    def ecc(p, q):
        return np.mean(np.conj(p) * q)

    for n, m in zeta_indices(ell):
        z1, z2 = z(n - 1, m), z(n - 2, m)
        rhs = grid.grad(mul(a, ix * z1)) + ix * mul(a, grid.grad(z1) + ix * z2)
        if m == 0:
            rhs = rhs - pc[n + 1] + sum(ecc(pc[n + 1 - k], pc[k]) for k in range(n + 2))
        else:
            rhs = rhs + z(n, m - 1)
        c = 0.0
        for k in range(1, n + 1):
            for l in range(2, k + 3):
                c -= np.conj(lam[l] / lam[2]) * ecc(pc[k + 2 - l], z(n - k, m))
        if m >= 1:
            c += np.conj(1 / lam[2]) * sum(ecc(pc[n + 2 - k], z(k, m - 1)) for k in range(n + 3))
        zc[(n, m)] = _solve(grid, a, rhs, log, f"zeta_xi{n},{m}", mean_target=c)
    return zc


def tau_indices(ell: int):
    out = [(n, 0) for n in range(0, ell - 2)]
    out += [(n, m) for m in range(1, (ell - 1) // 2 + 1) for n in range(-1, ell - 2 - 2 * m)]
    return out


def build_tau(grid: CellGrid, a: np.ndarray, zeta: dict, ell: int, log: list | None = None) -> dict:
    """tau[n, m] = Phi' with the flux of zeta (mean removed for m = 0, plus zeta[n+1, m-1] for m >= 1)."""
    mul = grid.product
    tau = {}

    def z(n, m):
        return zeta.get((n, m), _zeros(grid))

    for n, m in tau_indices(ell):
        rhs = mul(a, grid.grad(z(n, m)) + z(n - 1, m))
        if m == 0:
            rhs = rhs - np.mean(rhs)
        else:
            rhs = rhs + z(n + 1, m - 1)
        tau[(n, m)] = grid.grad(_poisson(grid, rhs, log, f"tau{n},{m}"))
    return tau


def tau_xi(grid: CellGrid, a: np.ndarray, zc: dict, ell: int, xi: float) -> dict:
    """xi-level flux correctors, to compare against tau[n, m] (i xi)^{n+1}."""
    mul = grid.product
    ix = 1j * xi
    zero = _zeros(grid, complex)
    out = {}

    def z(n, m):
        return zc.get((n, m), zero)

    for n, m in tau_indices(ell):
        rhs = mul(a, grid.grad(z(n, m)) + ix * z(n - 1, m))
        if m == 0:
            rhs = rhs - np.mean(rhs)
        else:
            rhs = rhs + z(n + 1, m - 1) / ix
        out[(n, m)] = grid.grad(solve_poisson(grid, rhs))
    return out


def gram(psi) -> np.ndarray:
    P = np.array(psi)
    return P @ P.T / P.shape[1]


def norm_polynomial(psi, ell: int) -> np.ndarray:
    """Coefficients c_s with E|sum_{n<=ell} psi_n (i eta)^n|^2 = sum_s c_s eta^s."""
    G = gram(psi[: ell + 1])
    c = np.zeros(2 * ell + 1)
    for p in range(ell + 1):
        for q in range(ell + 1):
            c[p + q] += (G[p, q] * (1j) ** p * (-1j) ** q).real
    return c


def gamma_multiplier(psi, ell: int, eta):
    """gamma_ell(eta) = 1 / E|sum_{n<=ell} psi_n (i eta)^n|^2."""
    c = norm_polynomial(psi, ell)
    return 1.0 / np.polynomial.polynomial.polyval(np.asarray(eta, dtype=float), c)


def gamma_taylor(psi, ell: int, order: int) -> np.ndarray:
    """Taylor coefficients of gamma_ell at 0 up to ``order`` by power-series inversion."""
    c = np.zeros(order + 1)
    full = norm_polynomial(psi, ell)
    c[: min(order + 1, full.size)] = full[: order + 1]
    g = np.zeros(order + 1)
    g[0] = 1.0 / c[0]
    for s in range(1, order + 1):
        g[s] = -np.dot(c[1 : s + 1], g[s - 1 :: -1][:s]) / c[0]
    return g


@dataclass(frozen=True)
class SpectralCorrectors:
    grid: CellGrid
    a: np.ndarray
    ell: int
    psi: tuple
    b: np.ndarray
    sigma: tuple
    rho: dict
    zeta: dict
    tau: dict
    fredholm: tuple = field(default=(), repr=False)

    @property
    def abar(self) -> float:
        return float(self.b[1])

    def gamma(self, eta, ell: int | None = None):
        return gamma_multiplier(self.psi, self.ell if ell is None else ell, eta)

    def lambda_taylor(self, xi, ell: int | None = None):
        return lambda_taylor(self.b, xi, self.ell if ell is None else ell)

    def max_fredholm(self) -> float:
        return max((r for _, r in self.fredholm), default=0.0)

    def save(self, path) -> None:
        arrays = {"a": self.a, "b": self.b}
        arrays.update({f"psi_{n}": p for n, p in enumerate(self.psi)})
        arrays.update({f"sigma_{n}": s for n, s in enumerate(self.sigma)})
        arrays.update({f"rho_{n}": r for n, r in self.rho.items()})
        arrays.update({f"zeta_{n}_{m}": z for (n, m), z in self.zeta.items()})
        arrays.update({f"tau_{n}_{m}": t for (n, m), t in self.tau.items()})
        meta = {"kind": "spectral", "ell": self.ell, "N": self.grid.N, "dealias": self.grid.dealias}
        np.savez(path, meta=json.dumps(meta), **arrays)

    @classmethod
    def load(cls, path) -> "SpectralCorrectors":
        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
            ell = meta["ell"]
            keyed = {k: data[k] for k in data.files}
        pairs = lambda prefix: {
            tuple(int(s) for s in k[len(prefix):].split("_")): v for k, v in keyed.items() if k.startswith(prefix)
        }
        return cls(
            grid=CellGrid(meta["N"], meta["dealias"]),
            a=keyed["a"],
            ell=ell,
            psi=tuple(keyed[f"psi_{n}"] for n in range(ell + 1)),
            b=keyed["b"],
            sigma=tuple(keyed[f"sigma_{n}"] for n in range(ell + 1)),
            rho={k[0]: v for k, v in pairs("rho_").items()},
            zeta=pairs("zeta_"),
            tau=pairs("tau_"),
        )


def build_spectral(field_or_a, ell: int, grid: CellGrid | None = None) -> SpectralCorrectors:
    grid = CellGrid() if grid is None else grid
    if grid.N < MIN_CORRECTOR_N:
        raise ValueError(f"corrector builds need N >= {MIN_CORRECTOR_N}")
    a = field_or_a.sample(grid) if isinstance(field_or_a, CoefficientField) else np.asarray(field_or_a, float)
    log: list = []
    psi, b = build_psi_b(grid, a, ell, log)
    sigma = build_flux_sigma(grid, a, psi, b, log)
    rho = build_rho(grid, psi, log)
    zeta = build_zeta(grid, a, psi, b, ell, log)
    tau = build_tau(grid, a, zeta, ell, log)
    return SpectralCorrectors(grid, a, ell, tuple(psi), b, tuple(sigma), rho, zeta, tau, tuple(log))


def dual_path_gap(corr: SpectralCorrectors, xi: float) -> dict:
    """Max relative difference between xi-assembled real correctors and the complex solve."""
    grid, a, ell = corr.grid, corr.a, corr.ell
    pc, lam = psi_xi(grid, a, ell, xi)
    ix = 1j * xi
    gaps = {}

    def rel(x, y):
        scale = max(np.abs(y).max(), 1e-300)
        return float(np.abs(x - y).max() / scale) if scale > 1e-300 else float(np.abs(x).max())

    gaps["psi"] = max(rel(corr.psi[n] * ix**n, pc[n]) for n in range(ell + 1))
    lam_real = np.array([0, 0] + [-corr.b[n - 1] * ix**n for n in range(2, ell + 2)])
    gaps["lambda"] = float(np.abs(lam_real - lam).max() / abs(lam[2]))
    zc = zeta_xi(grid, a, pc, lam, ell, xi)
    if zc:
        gaps["zeta"] = max(rel(corr.zeta[k] * ix ** (k[0] + 1), zc[k]) for k in zc)
        tc = tau_xi(grid, a, zc, ell, xi)
        gaps["tau"] = max(rel(corr.tau[k] * ix ** (k[0] + 1), tc[k]) for k in tc)
    return gaps
