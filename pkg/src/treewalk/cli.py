"""Command-line entry point: one subcommand per experiment kind.

Flags override the config file; a master seed is mandatory (there is no
wall-clock default, reruns must be reproducible).  TREEWALK_WORKERS sets the
default worker count.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .harness import (EXPERIMENT_KINDS, ExperimentConfig, format_table,
                      parse_config_text, run)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, help="flat key=value config file")
    sub.add_argument("--seed", type=int, help="master seed (required)")
    sub.add_argument("--workers", type=int,
                     default=int(os.environ.get("TREEWALK_WORKERS", "1")))
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--timings", action="store_true",
                     help="record wall-clock runtimes in the CSV (breaks "
                          "byte-identical reruns)")
    sub.add_argument("--d", type=int, help="lattice dimension")
    sub.add_argument("--mu", help="offspring law: geometric | binary | p0,p1,...")
    sub.add_argument("--theta", help="jump law: lazy | box | file:PATH")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--tol", action="append", default=[], metavar="NAME=VAL",
                     help="tolerance override (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="treewalk",
        description="Monte Carlo experiments for tree-indexed random walks, "
                    "branching random walks and the discretized snake.")
    subs = ap.add_subparsers(dest="kind", required=True)

    s = subs.add_parser("range", help="scaled-range distribution across sizes")
    _add_common(s)
    s.add_argument("--sizes", help="comma list of tree sizes n")
    s.add_argument("--snake-bridge", action="store_true",
                   help="also compare against snake support volumes")
    s.add_argument("--m", type=int, help="snake lifetime grid")
    s.add_argument("--h", type=float, help="occupation cell width")
    s.add_argument("--snakes", type=int)

    s = subs.add_parser("localtime", help="local-time second moment vs kernel")
    _add_common(s)
    s.add_argument("--sizes", help="tree size n (single value)")

    s = subs.add_parser("hit", help="distant-point hitting probability")
    _add_common(s)
    s.add_argument("--a", help="target point, comma separated")
    s.add_argument("--cap", type=int, help="vertex cap (default 200|a|^4)")

    s = subs.add_parser("brw-identity", help="p-particle union-hit identity")
    _add_common(s)
    s.add_argument("--a", help="target point, comma separated")
    s.add_argument("--p", type=int, help="initial particles")
    s.add_argument("--cap", type=int)

    s = subs.add_parser("snake", help="snake covariance contract")
    _add_common(s)
    s.add_argument("--m", type=int, help="lifetime grid size")
    s.add_argument("--snakes", type=int)

    s = subs.add_parser("verify-all", help="full acceptance suite")
    _add_common(s)
    s.add_argument("--profile", choices=("full", "smoke"), default=None,
                   help="smoke runs reduced sizes (pipeline/determinism)")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        cfg = parse_config_text(args.config.read_text(), kind=args.kind)
    else:
        if args.seed is None:
            raise SystemExit("error: --seed is required (or a config file)")
        cfg = ExperimentConfig(kind=args.kind, seed=args.seed)
    overrides = {
        "seed": args.seed,
        "workers": args.workers,
        "out": args.out,
        "d": getattr(args, "d", None),
        "mu": getattr(args, "mu", None),
        "theta": getattr(args, "theta", None),
        "trials": getattr(args, "trials", None),
        "cap": getattr(args, "cap", None),
        "p": getattr(args, "p", None),
        "m": getattr(args, "m", None),
        "h": getattr(args, "h", None),
        "snakes": getattr(args, "snakes", None),
        "profile": getattr(args, "profile", None),
    }
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "sizes", None):
        cfg.sizes = tuple(int(t) for t in args.sizes.split(","))
    if getattr(args, "a", None):
        cfg.a = tuple(int(t) for t in args.a.split(","))
    if getattr(args, "snake_bridge", False):
        cfg.snake_bridge = True
    if args.timings:
        cfg.timings = True
    for item in args.tol:
        name, _, val = item.partition("=")
        cfg.tolerances[name] = float(val)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    report = run(cfg)
    print(format_table(report.records))
    print(f"report: {report.json_path}")
    for name, path in report.csv_paths.items():
        print(f"csv[{name}]: {path}")
    print("ALL CHECKS PASSED" if report.all_passed else "SOME CHECKS FAILED")
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
