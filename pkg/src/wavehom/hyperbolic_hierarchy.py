"""Hyperbolic (space-time) correctors and the revamped effective coefficients.

The hyperbolic family phi[n, m] carries n space and m time derivatives of
the effective solution. In one dimension every tensor is a scalar per cell
point and the homogenized tensors abar[n, m] are plain numbers, so the
quadratic forms xi . (abar (.) xi^{n-1}) xi reduce to abar[n, m] xi^{n+1}.

Recursion (loop over m outside, n inside):

    phi[0, 0] = 1,  phi[0, m] = 0  for m >= 1
    -(a phi[n,m]')' = (a phi[n-1,m])' + q[n-1,m]
    abar[n, m]      = E[a (phi[n,m]' + phi[n-1,m])]
    q[n, m]         = a (phi[n,m]' + phi[n-1,m]) - phi[n+1,m-2] - abar[n, m]
    q[0, m]         = a phi[0,m]' - phi[1,m-2]

The coupling term phi[n+1, m-2] is what makes E[q] = 0 and the residual
identity of the expansion telescope; ``crosscheck_b`` then recovers the
spectral coefficients from abar to round-off.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cell import MIN_CORRECTOR_N, CellGrid, CoefficientField, check_compatible, solve_elliptic, solve_poisson


class NonDivergenceFree(ValueError):
    """Modified flux fails the divergence-free compatibility condition."""


class SymmetryViolation(AssertionError):
    """Homogenized tensors break the transposition symmetry; signals a hierarchy bug."""


DIV_TOL = 1e-9


@dataclass(frozen=True)
class HyperbolicCorrectors:
    grid: CellGrid
    a: np.ndarray
    ell: int
    phi: dict
    abar: dict
    q: dict
    sigma_h: dict = field(default_factory=dict)
    fredholm: tuple = field(default=(), repr=False)

    def get_phi(self, n: int, m: int) -> np.ndarray:
        return self.phi.get((n, m), np.zeros(self.grid.N))

    def get_abar(self, n: int, m: int) -> float:
        return self.abar.get((n, m), 0.0)

    def save(self, path) -> None:
        arrays = {"a": self.a}
        arrays.update({f"phi_{n}_{m}": v for (n, m), v in self.phi.items()})
        arrays.update({f"q_{n}_{m}": v for (n, m), v in self.q.items()})
        arrays.update({f"sigma_{n}_{m}": v for (n, m), v in self.sigma_h.items()})
        meta = {
            "kind": "hyperbolic",
            "ell": self.ell,
            "N": self.grid.N,
            "dealias": self.grid.dealias,
            "abar": [[n, m, v] for (n, m), v in self.abar.items()],
        }
        np.savez(path, meta=json.dumps(meta), **arrays)

    @classmethod
    def load(cls, path) -> "HyperbolicCorrectors":
        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
            keyed = {k: data[k] for k in data.files}

        def pairs(prefix):
            return {tuple(int(s) for s in k[len(prefix):].split("_")): v for k, v in keyed.items() if k.startswith(prefix)}

        return cls(
            grid=CellGrid(meta["N"], meta["dealias"]),
            a=keyed["a"],
            ell=meta["ell"],
            phi=pairs("phi_"),
            abar={(n, m): v for n, m, v in meta["abar"]},
            q=pairs("q_"),
            sigma_h=pairs("sigma_"),
        )


def build_phi_a(field_or_a, ell: int, grid: CellGrid | None = None) -> HyperbolicCorrectors:
    """Hyperbolic correctors phi[n, m] and tensors abar[n, m] for n + m <= ell."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    grid = CellGrid() if grid is None else grid
    if grid.N < MIN_CORRECTOR_N:
        raise ValueError(f"corrector builds need N >= {MIN_CORRECTOR_N}")
    a = field_or_a.sample(grid) if isinstance(field_or_a, CoefficientField) else np.asarray(field_or_a, float)
    mul = grid.product
    zero = np.zeros(grid.N)
    phi = {(0, 0): np.ones(grid.N)}
    abar, q, log = {}, {}, []

    def g(n, m):
        return phi.get((n, m), zero)

    for m in range(ell + 1):
        if m > 0:
            phi[(0, m)] = zero.copy()
        q[(0, m)] = mul(a, grid.grad(g(0, m))) - g(1, m - 2)
        for n in range(1, ell + 1 - m):
            rhs = grid.grad(mul(a, g(n - 1, m))) + q[(n - 1, m)]
            log.append((f"phi{n},{m}", check_compatible(rhs)))
            phi[(n, m)] = solve_elliptic(grid, a, rhs)
            flux = mul(a, grid.grad(phi[(n, m)]) + g(n - 1, m))
            abar[(n, m)] = float(np.mean(flux))
            q[(n, m)] = flux - g(n + 1, m - 2) - abar[(n, m)]
    hc = HyperbolicCorrectors(grid, a, ell, phi, abar, q, fredholm=tuple(log))
    return HyperbolicCorrectors(grid, a, ell, phi, abar, q, build_sigma_hyp(hc), tuple(log))


def modified_elliptic(grid: CellGrid, a: np.ndarray, ell: int):
    """Modified elliptic hierarchy (phi~, a~, q~) with skew flux correctors.

    Returns (phit, at, qt, sigma0). In one dimension a skew-symmetric 1x1
    matrix is zero, so sigma0 vanishes; before using that we check that the
    modified flux is divergence-free, which is the solvability condition of
    the skew construction.
    """
    mul = grid.product
    phit = [np.ones(grid.N)]
    at, qt = [0.0], [np.zeros(grid.N)]
    sigma0 = [np.zeros(grid.N)]
    for n in range(1, ell + 1):
        rhs = grid.grad(mul(a, phit[n - 1])) + qt[n - 1]
        phit.append(solve_elliptic(grid, a, rhs))
        flux = mul(a, grid.grad(phit[n]) + phit[n - 1])
        at.append(float(np.mean(flux)))
        qn = flux - at[n] - sigma0[n - 1]
        div = grid.l2(grid.div(qn))
        if div > DIV_TOL * max(grid.l2(flux), 1.0):
            raise NonDivergenceFree(f"modified flux of order {n} has divergence {div:.2e}")
        qt.append(qn)
        sigma0.append(np.zeros(grid.N))
    return phit, at, qt, sigma0


def build_sigma_hyp(hc: HyperbolicCorrectors) -> dict:
    """Flux correctors sigma[n, m]: Phi' with -Phi'' = q[n, m] for m >= 1, zero for m = 0."""
    grid = hc.grid
    sigma = {}
    _, _, _, sigma0 = modified_elliptic(grid, hc.a, hc.ell)
    for (n, m), qnm in hc.q.items():
        if m == 0:
            sigma[(n, m)] = sigma0[n] if n < len(sigma0) else np.zeros(grid.N)
        else:
            sigma[(n, m)] = grid.grad(solve_poisson(grid, qnm))
    return sigma


def check_symmetry(abar: dict, tol: float = 1e-9, scale: float | None = None) -> dict:
    """Check abar[n, m] = (-1)^{n+1} abar[n, m] (the 1D reading of the transposition identity).

    For n odd the relation is void; for n even it forces abar[n, m] = 0.
    Returns {(n, m): residual}; raises SymmetryViolation above ``tol`` relative.
    """
    scale = scale if scale is not None else max([abs(v) for v in abar.values()] + [1e-300])
    report = {}
    for (n, m), v in abar.items():
        res = abs(v - (-1) ** (n + 1) * v) / scale
        report[(n, m)] = res
        if res > tol:
            raise SymmetryViolation(f"abar[{n},{m}] = {v:.3e} breaks transposition symmetry")
    return report


@lru_cache(maxsize=None)
def enumerate_I(k: int) -> tuple:
    """m in N^k with |m| = 2(k-1) and partial sums sum_{j<=s} m_j >= 2s for s < k."""
    if k < 1:
        raise ValueError("k >= 1")
    total = 2 * (k - 1)
    return tuple(
        mm
        for mm in itertools.product(range(total + 1), repeat=k)
        if sum(mm) == total and all(sum(mm[:s]) >= 2 * s for s in range(1, k))
    )


@lru_cache(maxsize=None)
def enumerate_J(k: int, caps) -> tuple:
    """m in N^k with m_j <= caps[j] and partial sums >= 2s for all s <= k.

    ``caps`` is an int (same bound for every slot) or a length-k tuple.
    """
    if k < 1:
        raise ValueError("k >= 1")
    caps = (caps,) * k if isinstance(caps, int) else tuple(caps)
    return tuple(
        mm
        for mm in itertools.product(*(range(c + 1) for c in caps))
        if all(sum(mm[:s]) >= 2 * s for s in range(1, k + 1))
    )


def _compositions(total: int, k: int):
    # n in N^k with n_j >= 1 and |n| = total
    if k == 1:
        if total >= 1:
            yield (total,)
        return
    for first in range(1, total - k + 2):
        for rest in _compositions(total - first, k - 1):
            yield (first,) + rest


def revamp_b(abar: dict, ell: int) -> np.ndarray:
    """b[p] = sum_k sum_{m in I_k} sum_{k+|n|=p+1} prod_j abar[n_j, m_j]; index 0 unused."""
    b = np.zeros(ell + 1)
    for p in range(1, ell + 1):
        tot = 0.0
        for k in range(1, p + 1):
            for mm in enumerate_I(k):
                for nn in _compositions(p + 1 - k, k):
                    prod = 1.0
                    for nj, mj in zip(nn, mm):
                        if nj + mj > max(n + m for n, m in abar):
                            raise ValueError(f"abar[{nj},{mj}] needed for p={p}; build with larger ell")
                        prod *= abar.get((nj, mj), 0.0)
                    tot += prod
        b[p] = tot
    return b


def revamp_c(abar: dict, ell: int) -> dict:
    """Source coefficients c[p] for 1 <= p <= ell - 2 as {time order j: coefficient}.

    The effective source is f + sum_p eps^{p+1} sum_j c[p][j] (i xi)^{p+1-j} d_t^j f,
    gathered from sum_k sum_n sum_{m in J_k} prod_j abar[n_j, m_j] with
    |n| + |m| = p + k + 1, m_j <= ell - n_j and time order j = |m| - 2k.
    """
    c = {p: {} for p in range(1, ell - 1)}
    for k in range(1, ell + 1):
        for nn in itertools.product(range(1, ell + 1), repeat=k):
            caps = tuple(ell - nj for nj in nn)
            for mm in enumerate_J(k, caps):
                p = sum(nn) + sum(mm) - k - 1
                if not 1 <= p <= ell - 2:
                    continue
                prod = 1.0
                for nj, mj in zip(nn, mm):
                    prod *= abar.get((nj, mj), 0.0)
                if prod == 0.0:
                    continue
                j = sum(mm) - 2 * k
                c[p][j] = c[p].get(j, 0.0) + prod
    return c


def source_terms(abar: dict, ell: int, eps: float, xi: float) -> dict:
    """Per-mode effective source: {time order j: multiplier of d_t^j f}, including the bare f."""
    out = {0: 1.0 + 0j}
    for p, terms in revamp_c(abar, ell).items():
        for j, cp in terms.items():
            out[j] = out.get(j, 0.0) + cp * eps ** (p + 1) * (1j * xi) ** (p + 1 - j)
    return out


def crosscheck_b(spectral_b, revamped_b, pmax: int | None = None) -> np.ndarray:
    """Per-p relative difference; even orders (zero in exact arithmetic) are scaled by |b[1]|."""
    sb, rb = np.asarray(spectral_b), np.asarray(revamped_b)
    pmax = min(sb.size, rb.size) - 1 if pmax is None else pmax
    out = np.zeros(pmax + 1)
    for p in range(1, pmax + 1):
        scale = abs(sb[p]) if p % 2 == 1 and abs(sb[p]) > 0 else abs(sb[1])
        out[p] = abs(sb[p] - rb[p]) / scale if scale > 0 else abs(sb[p] - rb[p])
    return out
