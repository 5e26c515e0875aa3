"""Command-line front end.

    holdergp analyze <config> [--out DIR] [--seed N] [--strict] [--threads N]
    holdergp simulate <config> ...
    holdergp report <config> ...

``analyze`` runs the configured analyses and writes ``report.json`` (plus
``paths.csv``/``constants.csv`` when simulation or path statistics are
requested).  ``simulate`` runs only the simulation.  ``report`` prints a
summary of the existing ``report.json`` for the configuration, running the
analyses first when there is none.

Exit status: 0 on success, 2 for a rejected configuration, 3 under
``--strict`` when some verdict does not hold.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import __version__
from .config import ConfigError, parse_config
from .report import RegularityReport, run, summary

EXIT_CONFIG = 2
EXIT_VIOLATED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holdergp", description="Hölder regularity of Gaussian processes")
    parser.add_argument("--version", action="version", version=f"holdergp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("analyze", "run the configured analyses"),
        ("simulate", "simulate paths only"),
        ("report", "summarize the report for a configuration"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="base seed (overrides the config)")
        p.add_argument("--strict", action="store_true", help="exit nonzero when a verdict is violated")
        p.add_argument("--threads", type=int, default=1, help="worker threads for simulation")
    return parser


def _load(args):
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out=args.out)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("--threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "simulate":
        report = run(cfg, threads=args.threads, analyses=["simulate"])
    elif args.command == "report":
        path = os.path.join(cfg.out, "report.json")
        report = None
        if os.path.exists(path):
            with open(path) as fh:
                report = RegularityReport.from_json(fh.read())
            if report.config != json.loads(json.dumps(cfg.to_dict())):
                report = None  # stale: written for another configuration
        if report is None:
            report = run(cfg, threads=args.threads)
    else:
        report = run(cfg, threads=args.threads)

    print(summary(report))
    if args.strict and report.violated():
        print(f"violated: {', '.join(report.violated())}", file=sys.stderr)
        return EXIT_VIOLATED
    return 0


if __name__ == "__main__":
    sys.exit(main())
