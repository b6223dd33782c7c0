"""Command-line entry point: ``msched converge|sweep --config FILE``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .harness import ConfigError, parse_config, run_convergence, run_sweep, with_overrides, write_results

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _workers(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("workers must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msched", description=__doc__)
    parser.add_argument("command", choices=("converge", "sweep"))
    parser.add_argument("--config", required=True, type=Path, help="key=value experiment file")
    parser.add_argument("--seed", type=_u64, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="CSV path; a .json mirror is written beside it")
    parser.add_argument("--workers", type=_workers, default=None,
                        help="worker processes for sweeps (default: $MSCHED_WORKERS or 1)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    workers = args.workers
    if workers is None:
        env = os.environ.get("MSCHED_WORKERS", "1")
        try:
            workers = _workers(env)
        except (ValueError, argparse.ArgumentTypeError):
            print(f"msched: error: MSCHED_WORKERS={env!r} is not a positive integer", file=sys.stderr)
            return EXIT_CONFIG

    try:
        text = args.config.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        print(f"msched: error: cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        spec = with_overrides(parse_config(text), seed=args.seed, out=args.out)
        if args.command == "converge":
            rows = run_convergence(spec)
        else:
            rows = run_sweep(spec, workers=workers)
        csv_path, json_path = write_results(rows, spec.out, args.command)
    except ConfigError as exc:
        print(f"msched: config error in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any run failure maps to the runtime exit code
        print(f"msched: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(rows)} rows to {csv_path} and {json_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
