"""Command-line experiment runner.

    driftimplicit run CONFIG [--seed N] [--paths M] [--out-dir DIR] [--workers W]
    driftimplicit presets

Exit status: 0 success, 2 malformed config, 3 violated process hypothesis,
4 solver failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .analysis import error_table, fit_order
from .config import PRESETS, ConfigError, load_config
from .processes import ParameterError
from .schemes import SolverError

EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_SOLVER = 4


def list_presets(out=None):
    """Print the shipped presets; returns them as a list."""
    out = sys.stdout if out is None else out
    presets = list(PRESETS.values())
    width = max(len(p.name) for p in presets)
    for p in presets:
        params = ", ".join(f"{k}={v}" for k, v in p.params.items())
        print(f"{p.name:<{width}}  {p.process:<18}  {p.exercises}", file=out)
        print(f"{'':<{width}}  {params}", file=out)
        if p.description:
            print(f"{'':<{width}}  {p.description}", file=out)
    return presets


def _summary(table, fit, out):
    print(f"# {table.label}", file=out)
    print(f"# p={table.p:g}  paths={table.paths}  n_ref={table.n_ref}  seed={table.seed}", file=out)
    print(f"{'n':>8}  {'error':>12}  {'± (99%)':>12}", file=out)
    for r in table.rows:
        print(f"{r.n:>8d}  {r.error:>12.4e}  {r.half_width:>12.2e}", file=out)
    if fit is not None:
        print(f"order {fit.slope:.4f}  (log2-fit rms residual {fit.residual:.3g})", file=out)
    print(f"min state {table.min_state:.6g}", file=out)


def run_experiment(path, seed=None, paths=None, out_dir=None, workers=None, out=None) -> int:
    """Run one config file; returns the exit status."""
    out = sys.stdout if out is None else out
    try:
        config = load_config(path, seed=seed, paths=paths, out_dir=out_dir, workers=workers)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = error_table(config)
    except ParameterError as err:
        cond = f" [violated: {err.condition}]" if err.condition else ""
        print(f"error: {err}{cond}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except SolverError as err:
        print(f"error: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    fit = fit_order(table) if len(table.rows) >= 3 and all(table.errors > 0) else None
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, config.errors_csv), "w", newline="") as fh:
        fh.write(table.to_csv())
    payload = {
        "slope": None if fit is None else fit.slope,
        "intercept": None if fit is None else fit.intercept,
        "residual": None if fit is None else fit.residual,
        "min_state": table.min_state,
        "label": table.label,
        "config": config.as_dict(),
    }
    with open(os.path.join(config.out_dir, config.fit_json), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _summary(table, fit, out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftimplicit",
                                     description="Strong convergence experiments for the drift implicit Euler scheme.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--paths", type=int)
    run.add_argument("--out-dir")
    run.add_argument("--workers", type=int, help="defaults to the number of CPUs")
    sub.add_parser("presets", help="list shipped parameter presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        list_presets()
        return 0
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    return run_experiment(args.config, args.seed, args.paths, args.out_dir, workers)


if __name__ == "__main__":
    sys.exit(main())
