"""Heterogeneous wave equation u'' - (a(x/eps) u')' = f on a periodic line.

The line is the torus [-L, L) with eps = 1/K and L integer, so a(x/eps) is
exactly periodic and every grid node x_i sits on a cell node of the
corrector grid. Spatial derivatives are pseudo-spectral (rfft), time
stepping is velocity Verlet.

Fields that are sums of modulated cell functions,

    u(x) = sum_k exp(i xi_k x) W_k(x / eps),

are carried around as ``ModalField`` and only put on the line grid when a
pointwise comparison is needed. For band-limited data (|xi_k| < pi/eps) the
modulated functions are L2-orthogonal, so their norms need no line grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cell import CellGrid, CoefficientField
from .effective import Impulse

CFL = 0.2
MIN_PPC = 32


class CFLViolation(ValueError):
    """Time step above the leapfrog stability margin."""


class NonCommensurate(ValueError):
    """Grid, domain and eps do not line up with whole cells."""


class GridMismatch(ValueError):
    """Fields live on different grids or times."""


@dataclass(frozen=True)
class ModalField:
    """Per-mode cell profiles W_k (values, t-derivative, y-derivative) at one time."""

    eps: float
    xis: np.ndarray
    W: np.ndarray
    dW: np.ndarray
    Wy: np.ndarray

    def grad_cells(self) -> np.ndarray:
        """Cell profiles of the spatial gradient: i xi W + W_y / eps."""
        return 1j * self.xis[:, None] * self.W + self.Wy / self.eps

    def __sub__(self, other: "ModalField") -> "ModalField":
        if self.eps != other.eps or not np.array_equal(self.xis, other.xis):
            raise GridMismatch("modal fields differ in eps or modes")
        return ModalField(self.eps, self.xis, self.W - other.W, self.dW - other.dW, self.Wy - other.Wy)

    def norms(self, L: float) -> tuple:
        """(L2 norm of u, L2 norm of (d_t u, d_x u)) on the torus [-L, L)."""
        l2 = np.sqrt(2 * L * np.sum(np.mean(np.abs(self.W) ** 2, axis=1)))
        en = np.sqrt(2 * L * np.sum(np.mean(np.abs(self.dW) ** 2 + np.abs(self.grad_cells()) ** 2, axis=1)))
        return float(l2), float(en)


@dataclass(frozen=True)
class LineDomain:
    """Torus [-L, L) resolved with ``ppc`` points per eps-cell."""

    L: int
    eps: float
    ppc: int = MIN_PPC

    def __post_init__(self):
        K = round(1 / self.eps)
        if abs(K * self.eps - 1) > 1e-12:
            raise NonCommensurate(f"1/eps = {1 / self.eps} is not an integer")
        if int(self.L) != self.L or self.L <= 0:
            raise NonCommensurate("L must be a positive integer")
        if self.ppc < MIN_PPC:
            raise NonCommensurate(f"need at least {MIN_PPC} points per cell")

    @property
    def K(self) -> int:
        return round(1 / self.eps)

    @property
    def M(self) -> int:
        return 2 * int(self.L) * self.K * self.ppc

    @property
    def dx(self) -> float:
        return 2 * self.L / self.M

    @property
    def x(self) -> np.ndarray:
        return -self.L + np.arange(self.M) * self.dx

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.rfftfreq(self.M, self.dx)

    def cell_index(self, grid: CellGrid) -> np.ndarray:
        """Index j of the cell node hit by x_i / eps, i.e. x_i/eps = -1/2 + j/N mod 1."""
        if grid.N % self.ppc:
            raise NonCommensurate(f"cell grid N={grid.N} not a multiple of ppc={self.ppc}")
        stride = grid.N // self.ppc
        return (np.arange(self.M) * stride + grid.N // 2) % grid.N

    def coefficient(self, a: CoefficientField) -> np.ndarray:
        return a(self.x / self.eps)

    def deriv(self, u: np.ndarray) -> np.ndarray:
        return np.fft.irfft(1j * self.k * np.fft.rfft(u), self.M)

    def modulate(self, modal: ModalField, grid: CellGrid) -> tuple:
        """Real line-grid values (u, d_t u, d_x u) of a modal field."""
        if abs(modal.eps - self.eps) > 1e-15:
            raise GridMismatch("modal field and domain use different eps")
        idx = self.cell_index(grid)
        u = np.zeros(self.M, dtype=complex)
        du = np.zeros_like(u)
        ux = np.zeros_like(u)
        G = modal.grad_cells()
        for n, xi in enumerate(modal.xis):
            e = np.exp(1j * xi * self.x)
            u += e * modal.W[n, idx]
            du += e * modal.dW[n, idx]
            ux += e * G[n, idx]
        return u.real, du.real, ux.real

    def l2(self, u) -> float:
        return float(np.sqrt(np.sum(np.abs(u) ** 2) * self.dx))


@dataclass(frozen=True)
class WaveState:
    t: float
    u: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    domain: LineDomain
    dt: float
    snapshots: tuple
    energy_log: np.ndarray = field(repr=False)
    f_l1: np.ndarray = field(repr=False, default=None)

    def at(self, t: float) -> WaveState:
        for s in self.snapshots:
            if abs(s.t - t) < 1e-9:
                return s
        raise KeyError(f"no snapshot at t={t}")


def max_dt(a: CoefficientField, domain: LineDomain) -> float:
    return CFL * domain.dx / np.sqrt(a.upper)


def _step_count(times, dt_max: float, t0: float) -> tuple:
    # common step dt that lands exactly on every snapshot time
    spans = [Fraction(t - t0).limit_denominator(10**6) for t in times]
    if any(s <= 0 for s in spans):
        raise ValueError("snapshot times must lie after the start of the impulse")
    den = np.lcm.reduce([s.denominator for s in spans])
    nums = [int(s * den) for s in spans]
    unit = Fraction(int(np.gcd.reduce(nums)), int(den))
    sub = int(np.ceil(float(unit) / dt_max))
    dt = float(unit) / sub
    return dt, [round(float(s) / dt) for s in spans]


def energy(state: WaveState, a_eps: np.ndarray, domain: LineDomain) -> float:
    """0.5 int (v^2 + a_eps u_x^2) dx."""
    ux = domain.deriv(state.u)
    return 0.5 * float(np.sum(state.v**2 + a_eps * ux**2) * domain.dx)


def integrate(
    a: CoefficientField,
    domain: LineDomain,
    f: Impulse,
    snapshots,
    dt: float | None = None,
    log_energy: bool = True,
) -> Trajectory:
    """Velocity Verlet from the start of supp f1 with u = v = 0.

    The energy log records, once the impulse is over, the discrete invariant
    of the scheme, 0.5 |v_{n+1/2}|^2 + 0.5 sum a u_x^n u_x^{n+1} dx.
    """
    times = sorted(float(t) for t in np.atleast_1d(snapshots))
    t0, t1 = f.f1.support
    dt_lim = max_dt(a, domain)
    if dt is not None and dt > dt_lim * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.3e} exceeds {CFL} dx / sqrt(sup a) = {dt_lim:.3e}")
    dt, marks = _step_count(times, dt_lim if dt is None else dt, t0)
    ae = domain.coefficient(a)
    f2 = f.f2(domain.x)
    D = domain.deriv

    def accel(u, t):
        return D(ae * D(u)) + f.f1(np.array([t]))[0] * f2

    u = np.zeros(domain.M)
    v = np.zeros(domain.M)
    acc = accel(u, t0)
    ux = D(u)
    out, elog, fl1 = [], [], []
    mark_set = dict(zip(marks, times))
    nsteps = max(marks)
    l1 = 0.0
    f2n = domain.l2(f2)
    for n in range(nsteps):
        t = t0 + n * dt
        vh = v + 0.5 * dt * acc
        u = u + dt * vh
        uxn = D(u)
        acc = D(ae * uxn) + f.f1(np.array([t + dt]))[0] * f2
        v = vh + 0.5 * dt * acc
        if log_energy and t >= t1:
            elog.append((t + 0.5 * dt, 0.5 * float(np.sum(vh**2 + ae * ux * uxn) * domain.dx)))
        ux = uxn
        l1 += 0.5 * dt * (abs(f.f1(np.array([t]))[0]) + abs(f.f1(np.array([t + dt]))[0])) * f2n
        if n + 1 in mark_set:
            out.append(WaveState(mark_set[n + 1], u.copy(), v.copy()))
            fl1.append((mark_set[n + 1], l1))
    return Trajectory(domain, dt, tuple(out), np.array(elog).reshape(-1, 2), np.array(fl1))


def energy_drift(traj: Trajectory) -> float:
    e = traj.energy_log[:, 1]
    if e.size == 0:
        return 0.0
    return float((e.max() - e.min()) / abs(e[0]))


def apriori_check(traj: Trajectory, a: CoefficientField) -> list:
    """Rows (t, |Du| / |f|_{L1 L2}, |u| / (t |f|_{L1 L2})); None where f has not acted yet."""
    ae = traj.domain.coefficient(a)
    rows = []
    for s, (_, l1) in zip(traj.snapshots, traj.f_l1):
        if l1 == 0:
            rows.append((s.t, None, None))
            continue
        du = np.sqrt(2 * energy(s, ae, traj.domain))
        rows.append((s.t, du / l1, traj.domain.l2(s.u) / (max(s.t, 1.0) * l1)))
    return rows
