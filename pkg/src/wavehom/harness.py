"""Experiment sweeps: convergence in eps, growth in t, summability in ell, cross-checks.

The reference solution for the sweeps is the Bloch-Duhamel solution on the
torus; it is exact up to quadrature and band truncation and is itself
checked against the fine time stepper in ``run_crosschecks``. All errors are
torus norms computed mode by mode (Parseval), so no line grid is needed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .bloch import BlochSolver, bloch_duhamel, taylor_residual
from .cell import CellGrid, make_field
from .effective import (
    Bump,
    EffectiveSymbolSpec,
    Impulse,
    Variant,
    solve_effective,
    variant_compare,
)
from .expansion import assemble_H, assemble_S, error_norms
from .fine_solver import LineDomain, energy_drift, integrate
from .hyperbolic_hierarchy import build_phi_a, check_symmetry, crosscheck_b, revamp_b, revamp_c
from .spectral_hierarchy import build_spectral, dual_path_gap

log = logging.getLogger(__name__)

FLOOR = 1e-11


@dataclass
class ExperimentConfig:
    field_name: str = "sine"
    field_params: dict = field(default_factory=dict)
    ell: list = field(default_factory=lambda: [1, 2, 3])
    eps_list: list = field(default_factory=lambda: [1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128])
    t_list: list = field(default_factory=lambda: [2.0])
    variant: str = "base"
    grid_N: int = 512
    grid_ppc: int = 32
    grid_dt: float | None = None
    bloch_K: int = 32
    bloch_modes: int = 12
    impulse_R: float = 4.0
    impulse_L: int = 8
    impulse_t0: float = 0.0
    impulse_width: float = 1.0
    impulse_seed: int = 0
    impulse_amplitude: float = 1.0
    out_dir: str = "out"
    workers: int = 1

    # flat dotted keys in files map onto these attributes
    _KEYS = {
        "field.name": "field_name",
        "field.params": "field_params",
        "grid.N": "grid_N",
        "grid.M": "grid_ppc",
        "grid.ppc": "grid_ppc",
        "grid.dt": "grid_dt",
        "impulse.R": "impulse_R",
        "impulse.L": "impulse_L",
        "impulse.t0": "impulse_t0",
        "impulse.width": "impulse_width",
        "impulse.seed": "impulse_seed",
        "impulse.amplitude": "impulse_amplitude",
        "out.dir": "out_dir",
    }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        kwargs = {cls._KEYS.get(k, k): v for k, v in d.items()}
        known = set(cls.__dataclass_fields__)
        bad = set(kwargs) - known
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:12]

    def validate(self) -> None:
        for eps in self.eps_list:
            LineDomain(int(self.impulse_L), eps, self.grid_ppc)
            if self.variant == "base" and eps * self.impulse_R > 1.0:
                raise ValueError(f"eps R = {eps * self.impulse_R} too large for the base symbol")


class Context:
    """Lazily built, cached ingredients for one configuration."""

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.grid = CellGrid(cfg.grid_N)
        self.field = make_field(cfg.field_name, **cfg.field_params)
        self._refs = {}

    @cached_property
    def ell_max(self) -> int:
        return max(max(self.cfg.ell), 4)

    @cached_property
    def spectral(self):
        return build_spectral(self.field, self.ell_max + 1, self.grid)

    @cached_property
    def hyperbolic(self):
        return build_phi_a(self.field, self.ell_max + 1, self.grid)

    @cached_property
    def bloch(self) -> BlochSolver:
        return BlochSolver(self.field, self.cfg.bloch_K, self.grid)

    @cached_property
    def impulse(self) -> Impulse:
        c = self.cfg
        return Impulse.band_limited(c.impulse_L, c.impulse_R, c.impulse_seed, c.impulse_amplitude,
                                    Bump(c.impulse_t0, c.impulse_width))

    def reference(self, eps: float, t: float):
        key = (eps, t)
        if key not in self._refs:
            self._refs[key] = bloch_duhamel(self.bloch, eps, self.impulse, t, self.cfg.bloch_modes)
        return self._refs[key]

    def modes_S(self, ell: int, eps: float, t_list, variant: str | None = None):
        v = Variant(variant or self.cfg.variant)
        spec = EffectiveSymbolSpec(ell, eps, self.spectral.b, self.field.lam, v)
        return solve_effective(spec, self.impulse, t_list)

    def modes_H(self, ell: int, eps: float, t_list):
        ab = {k: v for k, v in self.hyperbolic.abar.items() if k[0] + k[1] <= ell}
        spec = EffectiveSymbolSpec(ell, eps, revamp_b(self.hyperbolic.abar, ell), self.field.lam,
                                   Variant.BASE, c=revamp_c(ab, ell))
        return solve_effective(spec, self.impulse, t_list)

    def errors(self, kind: str, ell: int, eps: float, t_list) -> list:
        """[(t, errL2, errEnergy)] of the chosen expansion against the reference."""
        if kind == "spectral":
            modes = self.modes_S(ell, eps, t_list)
            fields = [assemble_S(ell, eps, self.spectral, modes, self.impulse, t) for t in t_list]
        else:
            modes = self.modes_H(ell, eps, t_list)
            fields = [assemble_H(ell, eps, self.hyperbolic, modes, t) for t in t_list]
        return [(t, *error_norms(self.reference(eps, t), fe, L=self.impulse.L)) for t, fe in zip(t_list, fields)]


def fit_slope(x, y, floor: float = FLOOR) -> float:
    """Least-squares log-log slope, dropping points within 10x of the floor."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = y > 10 * floor
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def _map(cfg: ExperimentConfig, fn, items):
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def run_convergence(cfg: ExperimentConfig, kind: str = "spectral", ctx: Context | None = None) -> tuple:
    """Rows (eps, ell, t, errL2, errEnergy) and {(ell, t): energy-error slope in eps}."""
    ctx = ctx or Context(cfg)
    cells = [(ell, eps) for ell in cfg.ell for eps in cfg.eps_list]
    res = _map(cfg, lambda c: ctx.errors(kind, c[0], c[1], cfg.t_list), cells)
    rows = []
    for (ell, eps), errs in zip(cells, res):
        rows += [(eps, ell, t, e2, ee) for t, e2, ee in errs]
    slopes = {}
    for ell in cfg.ell:
        for t in cfg.t_list:
            pts = [(r[0], r[4]) for r in rows if r[1] == ell and r[2] == t]
            slopes[(ell, t)] = fit_slope(*zip(*pts))
    return rows, slopes


def run_time_growth(cfg: ExperimentConfig, eps: float, ell: int, kind: str = "spectral", ctx: Context | None = None) -> tuple:
    """Rows (t, errEnergy) over cfg.t_list and the fitted growth exponent in t."""
    ctx = ctx or Context(cfg)
    errs = ctx.errors(kind, ell, eps, cfg.t_list)
    rows = [(t, ee) for t, _, ee in errs]
    return rows, fit_slope([r[0] for r in rows], [r[1] for r in rows])


def run_summability(cfg: ExperimentConfig, eps: float, kind: str = "spectral", ctx: Context | None = None) -> list:
    """Rows (ell, sup_t errEnergy) over cfg.ell and cfg.t_list."""
    ctx = ctx or Context(cfg)
    return [(ell, max(ee for _, _, ee in ctx.errors(kind, ell, eps, cfg.t_list))) for ell in cfg.ell]


def secular_growth(b, f: Impulse, eps: float, t_list) -> dict:
    """Naive inductive cascade for ell = 3 versus the revamped profile.

    w1'' + abar xi^2 w1 = f, w3'' + abar xi^2 w3 = b3 xi^4 w1 (the second
    profile vanishes since b2 = 0), assembled as w = w1 + eps^2 w3. Returns
    arrays of |d_x w|, |d_x eps^2 w3| and |d_x u| for the well-posed
    dispersive solution u, all torus L2 norms per time.
    """
    t_list = np.asarray(t_list, float)
    abar, b3 = b[1], b[3]
    x, wts = np.polynomial.legendre.leggauss(60)
    lo, hi = f.f1.support
    s = lo + (hi - lo) * (x + 1) / 2
    ws = wts * (hi - lo) / 2 * f.f1(s)
    grad_w = np.zeros((t_list.size, f.xis.size), complex)
    grad_w3 = np.zeros_like(grad_w)
    for k, (xi, fh) in enumerate(zip(f.xis, f.f2hat)):
        A = np.zeros((4, 4))
        A[0, 1] = A[2, 3] = 1.0
        A[1, 0] = A[3, 2] = -abar * xi**2
        A[3, 0] = b3 * xi**4
        back = np.array([expm(-A * si)[:, 1] for si in s])  # column hit by the source in w1'
        base = back.T @ ws
        for i, t in enumerate(t_list):
            if t <= hi:
                keep = s <= t
                y = sum(expm(A * (t - si))[:, 1] * wi for si, wi in zip(s[keep], ws[keep]))
            else:
                y = expm(A * t) @ base
            grad_w[i, k] = 1j * xi * (y[0] + eps**2 * y[2]) * fh
            grad_w3[i, k] = 1j * xi * eps**2 * y[2] * fh
    spec = EffectiveSymbolSpec(3, eps, np.asarray(b), 1.0, Variant.BASE)
    sol = solve_effective(spec, f, t_list)
    norm = lambda v: np.sqrt(2 * f.L * np.sum(np.abs(v) ** 2, axis=1))
    return {
        "t": t_list,
        "cascade": norm(grad_w),
        "cascade_secular": norm(grad_w3),
        "revamped": norm(1j * f.xis * sol.u),
        "revamped_energy": np.sqrt(norm(1j * f.xis * sol.u) ** 2 + norm(sol.du) ** 2),
        "f_l1": f.f1.l1() * f.norm_f2(),
    }


def run_crosschecks(cfg: ExperimentConfig, ctx: Context | None = None, corrupt_b3: float = 1.0) -> dict:
    """Structural checks; {name: (passed, value, threshold)}."""
    ctx = ctx or Context(cfg)
    sp, hc = ctx.spectral, ctx.hyperbolic
    out = {}
    b1 = abs(sp.b[1])
    even = max(abs(sp.b[n]) / b1 for n in range(2, sp.ell + 1, 2))
    out["b_even_vanish"] = (even <= 1e-9, even, 1e-9)
    sub = {k: v for k, v in hc.abar.items() if k[0] <= 4 and k[1] <= 2}
    try:
        rep = check_symmetry(sub, scale=hc.abar[(1, 0)])
        out["abar_symmetry"] = (True, max(rep.values()), 1e-9)
    except AssertionError as e:
        out["abar_symmetry"] = (False, str(e), 1e-9)
    sb = sp.b.copy()
    sb[3] *= corrupt_b3
    diff = crosscheck_b(sb, revamp_b(hc.abar, 5), 5)
    out["b_coincide"] = (float(diff.max()) <= 1e-8, float(diff.max()), 1e-8)
    s2 = taylor_residual(ctx.bloch, sp.b, 2)[0]
    s4 = taylor_residual(ctx.bloch, sp.b, 4)[0]
    out["bloch_slope_2"] = (abs(s2 - 4) <= 0.3, s2, 4)
    out["bloch_slope_4"] = (abs(s4 - 6) <= 0.3, s4, 6)
    eta = np.random.default_rng(1).uniform(-20, 20, 100)
    gmax = float(max(sp.gamma(eta, ell).max() for ell in range(1, sp.ell + 1)))
    out["gamma_le_1"] = (gmax <= 1 + 1e-12, gmax, 1.0)
    fred = max(sp.max_fredholm(), max((r for _, r in hc.fredholm), default=0.0))
    out["fredholm"] = (fred <= 1e-9, fred, 1e-9)
    gaps = max(max(dual_path_gap(sp, xi).values()) for xi in (0.37, -1.3))
    out["dual_path"] = (gaps <= 1e-9, gaps, 1e-9)
    return out


def fine_vs_bloch(ctx: Context, eps: float = 1 / 16, t: float = 4.0, dt: float | None = None) -> dict:
    domain = LineDomain(int(ctx.impulse.L), eps, ctx.cfg.grid_ppc)
    traj = integrate(ctx.field, domain, ctx.impulse, [t], dt)
    u, du, _ = domain.modulate(ctx.reference(eps, t), ctx.grid)
    s = traj.at(t)
    return {"l2": domain.l2(s.u - u), "l2_v": domain.l2(s.v - du), "norm": domain.l2(u),
            "energy_drift": energy_drift(traj), "dt": traj.dt}


def variant_sweep(ctx: Context, ell: int, eps_list, t: float) -> tuple:
    """Pairwise variant distances per eps and their slopes in eps."""
    rows = []
    for eps in eps_list:
        d = variant_compare(ctx.spectral.b, ctx.field.lam, ell, eps, ctx.impulse, [t])
        rows.append((eps, {k: float(v[0]) for k, v in d.items()}))
    slopes = {k: fit_slope([r[0] for r in rows], [r[1][k] for r in rows], floor=1e-13) for k in rows[0][1]}
    return rows, slopes


def write_csv(path, header, rows, cfg: ExperimentConfig) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(header) + ["config_hash"])
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r] + [h])
    return path
