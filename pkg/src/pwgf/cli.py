"""Command-line runner.

    pwgf run-pwgf  --experiment gpe1d --seed 0 --out runs
    pwgf run-h1    --experiment gpe2d --init constant
    pwgf warmstart --experiment gpe2d [--grid runs/gpe2d/<stamp>/u]
    pwgf ablation  --axis N --values 1000 3000 10000
    pwgf reconstruct --run runs/gpe1d/<stamp> --n 2001

Results go to ``<out>/<experiment>/<timestamp>/``.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .descent import EXPERIMENTS
from .experiments import (ablation, load_run, make_config, run_dir, run_h1, run_pwgf,
                          warmstart)
from .reconstruct import GridFunction, reconstruct_u
from .reference import ConfigurationError
from .transport import TransportMap


def _threads(args):
    n = 1 if args.deterministic else args.threads
    if n is None:
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def _overrides(pairs):
    out = {}
    for p in pairs or []:
        if "=" not in p:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config(args):
    return make_config(args.experiment, args.config, _overrides(args.set), args.seed, args.out)


def _print(obj):
    print(json.dumps(obj, indent=2, default=str))


def cmd_run_pwgf(args):
    cfg = _config(args)
    d = run_dir(cfg.out, cfg.id)
    res = run_pwgf(cfg, d)
    s = res.summary
    brief = {k: s[k] for k in ("best_E", "best_lam", "best_step", "n_rejected", "wall_time")}
    for k in ("best_l2_error", "l2_error_at_best_theta"):
        if k in s:
            brief[k] = s[k]
    brief["directory"] = str(d)
    _print(brief)


def cmd_run_h1(args):
    cfg = _config(args)
    grid = None
    if args.init == "warm":
        if not args.grid:
            raise ConfigurationError("--init warm needs --grid")
        grid = GridFunction.load(args.grid)
    d = run_dir(cfg.out, cfg.id)
    res = run_h1(cfg, args.init, grid, d)
    _print(dict(E=res.E, lam=res.lam, converged=res.converged,
                steps=len(res.history) - 1, directory=str(d)))


def cmd_warmstart(args):
    cfg = _config(args)
    d = run_dir(cfg.out, cfg.id)
    if args.grid:
        grid = GridFunction.load(args.grid)
    else:
        grid = run_pwgf(cfg, d).grid
    rows, E_ref = warmstart(cfg, grid, d, args.e_ref)
    print(f"E_ref = {E_ref:.6f}")
    print(f"{'init':10s} {'E0':>12s} {'|E1-E_ref|':>12s} {'steps':>6s}")
    for r in rows:
        st = "-" if r["steps_to_tol"] is None else str(r["steps_to_tol"])
        print(f"{r['init']:10s} {r['E0']:12.6f} {r['E1_gap']:12.3e} {st:>6s}")
    print(f"directory: {d}")


def cmd_ablation(args):
    cfg = _config(args)
    d = run_dir(cfg.out, f"{cfg.id}_ablation_{args.axis}")
    rows = ablation(cfg, args.axis, args.values, args.seeds, d)
    for r in rows:
        print(f"{r['axis']}={r['value']:<6d} seed={r['seed']} best={r['best_err']:.4f} "
              f"final={r['final_err']:.4f} E={r['best_E']:.4f}")
    print(f"directory: {d}")


def cmd_reconstruct(args):
    cfg, theta = load_run(args.run)
    pc = cfg.pwgf
    tmap = TransportMap(pc.d, pc.H, pc.L, pc.n_ode, theta)
    n = args.n or cfg.recon_n
    grid = reconstruct_u(tmap, cfg.pwgf.reference_density(), n)
    out = Path(args.output) if args.output else Path(args.run) / f"u_{n}"
    raw, meta = grid.save(out)
    if grid.d == 1:
        grid.to_csv(out.with_suffix(".csv"))
    _print(dict(files=[str(raw), str(meta)], n=n, norm=grid.norm()))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pwgf", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--experiment", default="gpe1d",
                       choices=sorted(EXPERIMENTS) + ["custom"])
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", default=None, help="INI file with [pwgf]/[fd]/[output]")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a configuration field (repeatable)")
        p.add_argument("--out", default=None, help="output root (default: runs)")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded linear algebra")

    p = sub.add_parser("run-pwgf", help="train a transport map")
    common(p)
    p.set_defaults(func=cmd_run_pwgf)

    p = sub.add_parser("run-h1", help="finite-difference H1 gradient flow")
    common(p)
    p.add_argument("--init", choices=("constant", "random", "warm"), default="constant")
    p.add_argument("--grid", default=None, help="grid file stem (.f64/.json) for --init warm")
    p.set_defaults(func=cmd_run_h1)

    p = sub.add_parser("warmstart", help="compare H1 initialisations")
    common(p)
    p.add_argument("--grid", default=None,
                   help="reconstructed grid stem; a PWGF run is made when omitted")
    p.add_argument("--e-ref", type=float, default=None,
                   help="reference energy (default: converged constant-one run)")
    p.set_defaults(func=cmd_warmstart)

    p = sub.add_parser("ablation", help="1D hyperparameter sweep")
    common(p)
    p.add_argument("--axis", required=True, choices=("N", "H", "N_ODE"))
    p.add_argument("--values", type=int, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.set_defaults(func=cmd_ablation)

    p = sub.add_parser("reconstruct", help="grid export from a finished run")
    p.add_argument("--run", required=True, help="run directory or summary.json")
    p.add_argument("--n", type=int, default=None, help="nodes per axis incl. boundary")
    p.add_argument("--output", default=None, help="output stem")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--deterministic", action="store_true")
    p.set_defaults(func=cmd_reconstruct)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        with _threads(args):
            args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"pwgf: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
