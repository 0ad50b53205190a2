"""Command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 scientific failure
(inequality violation or calibration breach). Every metric artifact is a
deterministic function of (config, seed), so reruns are diffable.
"""

from __future__ import annotations

import argparse
import sys

from .config import RunConfig, load_config
from .errors import ConfigError, InfoshiftError
from .pipelines import (
    EXIT_USAGE,
    run_calibrate_estimators,
    run_correlate,
    run_replay,
    run_sweep_shifts,
    run_verify_bounds,
)

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="infoshift",
        description=(
            "Exact dependence metrics, shift bounds, and estimator "
            "calibration for discrete two-modality worlds."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("verify-bounds", "run seeded random-instance sweeps of every inequality"),
        ("calibrate-estimators", "check every estimator against analytic oracles"),
        ("sweep-shifts", "evaluate metrics and bounds over severity ladders"),
        ("correlate", "correlation tables over a completed sweep"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.add_argument(
            "--replay",
            help="recompute one serialized instance and print its record",
        )
        if name == "correlate":
            p.add_argument(
                "--run-dir",
                help="directory holding the sweep artifacts (defaults to --out)",
            )
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = cfg.replace(seed=args.seed)
    if args.out:
        cfg = cfg.replace(out=args.out)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.replay:
            return run_replay(args.replay)
        cfg = _load(args)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.command == "verify-bounds":
            return run_verify_bounds(cfg, jobs=args.jobs)
        if args.command == "calibrate-estimators":
            return run_calibrate_estimators(cfg, jobs=args.jobs)
        if args.command == "sweep-shifts":
            return run_sweep_shifts(cfg, jobs=args.jobs)
        if args.command == "correlate":
            return run_correlate(cfg, run_dir=getattr(args, "run_dir", None))
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfoshiftError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
