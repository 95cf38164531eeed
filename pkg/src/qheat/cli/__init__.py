"""Command-line front end: ``qheat run|reproduce|scan|validate``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import BracketNotFound, QHeatError
from .config import ConfigError, load_config
from .experiment import run_experiment, run_scan
from .figures import FIGURES, reproduce
from .io import csv_text, table_json_text, write_table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("qheat")


def _global_flags(parser: argparse.ArgumentParser, default) -> None:
    parser.add_argument("--seed", type=int, default=default, help="master seed (unsigned 64-bit)")
    parser.add_argument("--workers", type=int, default=default, help="worker processes for Monte Carlo")
    parser.add_argument("--format", choices=("csv", "json"), default=default, help="table format")
    parser.add_argument("--quiet", action="store_true", default=False if default is None else default,
                        help="suppress progress messages")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qheat", description=__doc__.splitlines()[0])
    _global_flags(parser, None)
    # SUPPRESS keeps flags given before the subcommand from being reset by the subparser
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run a configured experiment")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (overrides outputs.dir)")

    p = sub.add_parser("reproduce", parents=[common], help="emit a figure dataset")
    p.add_argument("figure", help=", ".join(FIGURES))
    p.add_argument("--out", default="figures")

    p = sub.add_parser("scan", parents=[common], help="beta_eff along a parameter grid")
    p.add_argument("spec")
    p.add_argument("--out", default="-", help="output file, '-' for stdout")

    p = sub.add_parser("validate", parents=[common], help="check a config file and exit")
    p.add_argument("config")
    return parser


def _run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.format is not None:
        cfg.fmt = args.format
    summary = run_experiment(cfg, args.out)
    log.info("beta_eff = %s (degenerate=%s)", summary["beta_eff"], summary["degenerate"])
    return EXIT_OK


def _reproduce(args) -> int:
    if args.figure not in FIGURES:
        print(f"qheat: unknown figure id {args.figure!r}; expected one of {', '.join(FIGURES)}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("--seed", "must be an unsigned 64-bit integer")
    ds = reproduce(args.figure, seed=args.seed or 0, workers=args.workers or 1)
    for path in ds.write(args.out, args.format or "csv"):
        log.info("wrote %s", path)
    return EXIT_OK


def _scan(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON ({exc})") from None
    if not isinstance(spec, dict):
        raise ConfigError("<root>", "scan spec must be a JSON object")
    columns, rows = run_scan(spec)
    fmt = args.format or "csv"
    if args.out == "-":
        sys.stdout.write(table_json_text(columns, rows) if fmt == "json" else csv_text(columns, rows))
    else:
        log.info("wrote %s", write_table(args.out, columns, rows, fmt))
    return EXIT_OK


def _validate(args) -> int:
    load_config(args.config)
    log.info("%s: ok", args.config)
    return EXIT_OK


COMMANDS = {"run": _run, "reproduce": _reproduce, "scan": _scan, "validate": _validate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(message)s"))
        log.addHandler(handler)
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"qheat: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BracketNotFound, ArithmeticError) as exc:
        print(f"qheat: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"qheat: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QHeatError as exc:
        print(f"qheat: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
