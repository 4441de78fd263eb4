"""Command line entry point: ``mefeel run`` and ``mefeel check-scheduler``."""
from __future__ import annotations

import argparse
import logging
import sys
import time

from .config import STRATEGY_NAMES, SimConfig, load_config
from .errors import ConfigurationError, FormatError
from .scheduler import compare_with_oracle
from .simulation import emit_metrics, run_simulation


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else SimConfig()
        seeds = {}
        if args.seed is not None:
            seeds = dict(channel_seed=args.seed, data_seed=args.seed, model_seed=args.seed)
        cfg = cfg.with_overrides(strategy=args.strategy, rounds=args.rounds, **seeds)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        metrics = run_simulation(cfg)
    except (FormatError, OSError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(metrics.to_csv() if args.format == "csv" else metrics.to_json())
        return 0
    try:
        emit_metrics(metrics, args.out, args.format)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_check(args) -> int:
    start = time.perf_counter()
    report = compare_with_oracle(args.instances, args.seed, args.max_devices, args.max_exits)
    elapsed = time.perf_counter() - start
    for v in report["violations"]:
        print(v)
    n = report["instances"]
    print(f"instances: {n}  greedy optimal: {report['optimal']} "
          f"({report['optimal'] / max(n, 1):.1%})  total exit gap: {report['gap_total']}  "
          f"violations: {len(report['violations'])}  time: {elapsed:.2f}s")
    return 1 if report["violations"] else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mefeel", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a federated training simulation")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--out", help="metrics file (default: stdout)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--seed", type=int, help="override channel, data and model seeds")
    run.add_argument("--strategy", choices=STRATEGY_NAMES)
    run.add_argument("--rounds", type=int)
    run.set_defaults(func=_cmd_run)

    check = sub.add_parser("check-scheduler", help="compare greedy plans with the exact oracle")
    check.add_argument("--instances", type=int, default=1000)
    check.add_argument("--max-devices", type=int, default=4)
    check.add_argument("--max-exits", type=int, default=3)
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=_cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
