"""Command-line entry point: ``bhp-lab run`` and ``bhp-lab validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, emit_config, parse_config
from .runner import error_report, run


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bhp-lab",
                                 description="Numerical boundary Harnack experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment named in a config file")
    r.add_argument("config", help="path to the key = value config file")
    r.add_argument("--out", help="output directory (default: output.path from the config)")
    r.add_argument("--levels", type=int, help="number of refinement levels")
    r.add_argument("--seed", type=int, help="override the random seed")
    v = sub.add_parser("validate", help="parse and validate a config without running it")
    v.add_argument("config")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        try:
            cfg = parse_config(args.config)
        except ConfigError as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return 2
        sys.stdout.write(emit_config(cfg))
        return 0
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        out = Path(args.out) if args.out else Path(args.config).parent / "out"
        error_report(str(exc), out, args.config)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run(cfg, args.out, args.levels, args.seed)
    print(f"{report.experiment}: {report.status} ({report.wall_time:.1f} s)")
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    return 0 if report_passed(report) else 1


def report_passed(report) -> bool:
    """True iff the report and every row carrying a ``passed`` flag pass."""
    return bool(report.passed) and all(r.get("passed", True) for r in report.rows)


if __name__ == "__main__":
    sys.exit(main())
