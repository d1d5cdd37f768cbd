"""Command-line front end: run sweeps, inspect bound constants, self-test."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import selftest as selftest_mod
from .bounds import calibrate_exp_bound
from .channel import features_per_slot
from .gains import build_gain_table
from .harness import ConfigError, emit_csv, load_config, run_sweep
from .stopping import gain_grid


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    result = run_sweep(cfg)
    emit_csv(result, cfg.out)
    print(f"wrote {len(result.rows)} rows to {cfg.out}")
    return 0


def _cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    model = cfg.build_model()
    table = build_gain_table(model)
    per_slot = features_per_slot(cfg.build_channel())
    grid = gain_grid(table, frozenset(), per_slot, cfg.horizon)
    params = calibrate_exp_bound(args.delta1, tuple(grid), args.tol)
    print(f"delta1       = {params.delta1:.17g}")
    print(f"c1           = {params.c1:.17g}")
    print(f"c2           = {params.c2:.17g}")
    print(f"gain grid    = {np.array2string(grid, precision=6)}")
    print(f"envelope     = "
          f"{np.array2string(params.c1 * np.exp(-params.c2 * grid), precision=6)}")
    return 0


def _cmd_selftest(args) -> int:
    results = selftest_mod.run_all(workers=args.workers)
    failed = [r for r in results if not r.passed]
    total = sum(r.seconds for r in results)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed "
          f"in {total:.0f}s")
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="progressftx",
        description="Progressive feature transmission simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a configured experiment sweep")
    p_sweep.add_argument("--config", required=True, help="key = value config file")
    p_sweep.add_argument("--seed", type=int, default=None,
                         help="override the master seed")
    p_sweep.add_argument("--out", default=None, help="override the output CSV path")
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="parallel point workers")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cal = sub.add_parser("calibrate",
                           help="print envelope constants for a model state")
    p_cal.add_argument("--config", required=True)
    p_cal.add_argument("--delta1", type=float, default=0.0,
                       help="differential distance of the current state")
    p_cal.add_argument("--tol", type=float, default=1e-9,
                       help="quadrature tolerance")
    p_cal.set_defaults(func=_cmd_calibrate)

    p_st = sub.add_parser("selftest", help="run the built-in oracle suite")
    p_st.add_argument("--workers", type=int, default=1,
                      help="parallel workers for the sweep-based checks")
    p_st.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
