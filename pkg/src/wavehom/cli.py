"""Command line entry point: ``python -m wavehom <command> [options]``.

Every command writes CSV under --out (default ./out) and prints a short
summary. The exit code is 0 only if every check the command ran passed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .effective import EffectiveSymbolSpec, Variant, solve_effective
from .expansion import assemble_H, assemble_S, error_norms
from .fine_solver import LineDomain, integrate
from .harness import (
    Context,
    ExperimentConfig,
    fit_slope,
    run_convergence,
    run_crosschecks,
    run_summability,
    run_time_growth,
    secular_growth,
    write_csv,
)


def _floats(s: str) -> list:
    return [float(Fraction(v.strip())) for v in s.split(",") if v.strip()]


def _ints(s: str) -> list:
    return [int(v) for v in s.split(",") if v]


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.field:
        cfg.field_name = args.field
    if getattr(args, "ell", None):
        cfg.ell = _ints(args.ell)
    if getattr(args, "eps", None):
        cfg.eps_list = _floats(args.eps)
    if getattr(args, "t", None):
        cfg.t_list = _floats(args.t)
    if args.out:
        cfg.out_dir = args.out
    if args.workers:
        cfg.workers = args.workers
    return cfg


def cmd_correctors(args, cfg):
    ctx = Context(cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.hyperbolic:
        hc = ctx.hyperbolic
        hc.save(out / "hyperbolic.npz")
        rows = [(n, m, v) for (n, m), v in sorted(hc.abar.items())]
        write_csv(out / "abar.csv", ["n", "m", "abar"], rows, cfg)
        for r in rows:
            print(f"abar[{r[0]},{r[1]}] = {r[2]: .12e}")
    else:
        sp = ctx.spectral
        sp.save(out / "spectral.npz")
        rows = [(n, sp.b[n]) for n in range(1, sp.ell + 1)]
        write_csv(out / "b.csv", ["n", "b"], rows, cfg)
        for n, v in rows:
            print(f"b[{n}] = {v: .12e}")
        print(f"max Fredholm ratio {sp.max_fredholm():.2e}")
    return True


def cmd_bloch(args, cfg):
    from .bloch import taylor_residual

    ctx = Context(cfg)
    xis = np.logspace(-3, -1, 15)
    s2, _, r2 = taylor_residual(ctx.bloch, ctx.spectral.b, 2, xis)
    s4, _, r4 = taylor_residual(ctx.bloch, ctx.spectral.b, 4, xis)
    rows = []
    for x, a, b in zip(xis, r2, r4):
        g = ctx.bloch.ground_state(x)
        rows.append((x, g.eigenvalue, g.gap, a, b))
    write_csv(Path(cfg.out_dir) / "bloch.csv", ["xi", "lambda", "gap", "taylor_residual_ell2", "taylor_residual_ell4"], rows, cfg)
    print(f"Taylor residual slopes: ell=2 {s2:.3f}, ell=4 {s4:.3f}")
    return abs(s2 - 4) <= 0.3 and abs(s4 - 6) <= 0.3


def cmd_solve_fine(args, cfg):
    ctx = Context(cfg)
    eps = cfg.eps_list[0]
    domain = LineDomain(int(ctx.impulse.L), eps, cfg.grid_ppc)
    snaps = _floats(args.snapshots)
    traj = integrate(ctx.field, domain, ctx.impulse, snaps, cfg.grid_dt)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savez(out / "fine.npz", x=domain.x, t=[s.t for s in traj.snapshots],
             u=np.array([s.u for s in traj.snapshots]), v=np.array([s.v for s in traj.snapshots]),
             eps=eps, L=domain.L, ppc=domain.ppc, dt=traj.dt)
    write_csv(out / "energy.csv", ["t", "energy"], traj.energy_log.tolist(), cfg)
    print(f"dt={traj.dt:.3e}, {len(traj.snapshots)} snapshots, M={domain.M}")
    return True


def cmd_solve_effective(args, cfg):
    ctx = Context(cfg)
    ell, eps = cfg.ell[0], cfg.eps_list[0]
    spec = EffectiveSymbolSpec(ell, eps, ctx.spectral.b, ctx.field.lam, Variant(args.variant))
    sol = solve_effective(spec, ctx.impulse, cfg.t_list)
    rows = [(t, xi, sol.u[i, k].real, sol.u[i, k].imag, sol.du[i, k].real, sol.du[i, k].imag)
            for i, t in enumerate(sol.t) for k, xi in enumerate(sol.xis)]
    write_csv(Path(cfg.out_dir) / "effective.csv", ["t", "xi", "re_u", "im_u", "re_dtu", "im_dtu"], rows, cfg)
    print(f"{len(rows)} rows, variant={args.variant}, ell={ell}, eps={eps}")
    return True


def cmd_expand(args, cfg):
    ctx = Context(cfg)
    ell, eps, t = cfg.ell[0], cfg.eps_list[0], cfg.t_list[0]
    if args.kind == "spectral":
        field = assemble_S(ell, eps, ctx.spectral, ctx.modes_S(ell, eps, [t]), ctx.impulse, t)
    else:
        field = assemble_H(ell, eps, ctx.hyperbolic, ctx.modes_H(ell, eps, [t]), t)
    ref = ctx.reference(eps, t)
    e2, ee = error_norms(ref, field, L=ctx.impulse.L)
    domain = LineDomain(int(ctx.impulse.L), eps, cfg.grid_ppc)
    u, _, _ = field.on_line(domain, ctx.grid)
    uref, _, _ = domain.modulate(ref, ctx.grid)
    out = Path(cfg.out_dir)
    step = max(1, domain.M // 4096)
    write_csv(out / f"expand_{args.kind}.csv", ["x", "u_ref", "approx", "diff"],
              [(x, a, b, a - b) for x, a, b in zip(domain.x[::step], uref[::step], u[::step])], cfg)
    write_csv(out / f"expand_{args.kind}_summary.csv", ["t", "errL2", "errEnergy"], [(t, e2, ee)], cfg)
    print(f"{args.kind} ell={ell} eps={eps} t={t}: errL2={e2:.3e} errEnergy={ee:.3e}")
    return True


def cmd_converge(args, cfg):
    rows, slopes = run_convergence(cfg, args.kind)
    write_csv(Path(cfg.out_dir) / f"converge_{args.kind}.csv", ["eps", "ell", "t", "errL2", "errEnergy"], rows, cfg)
    ok = True
    for (ell, t), s in slopes.items():
        good = abs(s - ell) <= 0.3
        ok &= good
        print(f"ell={ell} t={t}: slope {s:.3f} ({'ok' if good else 'off'})")
    return ok


def cmd_growth(args, cfg):
    ctx = Context(cfg)
    rows, expo = run_time_growth(cfg, cfg.eps_list[0], cfg.ell[0], ctx=ctx)
    write_csv(Path(cfg.out_dir) / "growth.csv", ["t", "err"], rows, cfg)
    sg = secular_growth(ctx.spectral.b, ctx.impulse, cfg.eps_list[0], cfg.t_list)
    write_csv(Path(cfg.out_dir) / "secular.csv", ["t", "cascade", "cascade_secular", "revamped"],
              list(zip(sg["t"], sg["cascade"], sg["cascade_secular"], sg["revamped"])), cfg)
    sec = fit_slope(sg["t"], sg["cascade_secular"])
    print(f"error growth exponent {expo:.3f}; cascade secular exponent {sec:.3f}")
    return expo <= 1.2


def cmd_summability(args, cfg):
    rows = run_summability(cfg, cfg.eps_list[0])
    write_csv(Path(cfg.out_dir) / "summability.csv", ["ell", "sup_err"], rows, cfg)
    ok = True
    for (l0, e0), (l1, e1) in zip(rows, rows[1:]):
        good = e1 <= 0.5 * e0 or e0 < 1e-9
        ok &= good
    for r in rows:
        print(f"ell={r[0]}: sup err {r[1]:.3e}")
    return ok


def cmd_crosscheck(args, cfg):
    res = run_crosschecks(cfg, corrupt_b3=args.corrupt_b3)
    write_csv(Path(cfg.out_dir) / "crosscheck.csv", ["check", "passed", "value", "threshold"],
              [(k, v[0], v[1], v[2]) for k, v in res.items()], cfg)
    for k, (ok, val, thr) in res.items():
        print(f"{'PASS' if ok else 'FAIL'} {k}: {val} (threshold {thr})")
    return all(v[0] for v in res.values())


COMMANDS = {
    "correctors": cmd_correctors,
    "bloch": cmd_bloch,
    "solve-fine": cmd_solve_fine,
    "solve-effective": cmd_solve_effective,
    "expand": cmd_expand,
    "converge": cmd_converge,
    "growth": cmd_growth,
    "summability": cmd_summability,
    "crosscheck": cmd_crosscheck,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavehom", description="Dispersive homogenization of the 1D wave equation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON file with experiment keys")
        s.add_argument("--field", help="coefficient field: sine, reciprocal_sine, constant")
        s.add_argument("--ell", help="comma-separated orders")
        s.add_argument("--eps", help="comma-separated eps values (fractions allowed, e.g. 1/16)")
        s.add_argument("--t", help="comma-separated times")
        s.add_argument("--out", help="output directory")
        s.add_argument("--workers", type=int)
        if name == "correctors":
            s.add_argument("--hyperbolic", action="store_true")
        if name == "solve-fine":
            s.add_argument("--snapshots", default="4")
        if name == "solve-effective":
            s.add_argument("--variant", default="base", choices=[v.value for v in Variant])
        if name in ("expand", "converge"):
            s.add_argument("--kind", default="spectral", choices=["spectral", "hyperbolic"])
        if name == "crosscheck":
            s.add_argument("--corrupt-b3", type=float, default=1.0, help="scale b3 to check that the coincidence test trips")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    cfg = _config(args)
    ok = COMMANDS[args.command](args, cfg)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
