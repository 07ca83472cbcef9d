"""Command line entry point: ``stokeskernel <experiment> --config <path> [options]``."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiments import RUNNERS, emit_outputs


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stokeskernel",
                                description="Half-space Stokes kernel experiments.")
    p.add_argument("command", choices=sorted(RUNNERS), help="experiment to run")
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--plot", action="store_true", help="also write an SVG chart per sweep")
    p.add_argument("--seed", type=int, default=0, help="seed for pseudo-random sample points")
    p.add_argument("--workers", type=int, default=1, help="threads for sweep points (results are order-independent)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"stokeskernel: {exc}", file=sys.stderr)
        return 2
    if args.workers < 1:
        print("stokeskernel: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        report = RUNNERS[args.command](cfg, seed=args.seed, workers=args.workers)
    except ConfigError as exc:
        print(f"stokeskernel: {exc}", file=sys.stderr)
        return 2
    paths = emit_outputs(report, args.out, args.plot)
    for p in paths:
        print(p)
    print(f"{report.name}: {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
