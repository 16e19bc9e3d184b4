"""``sot-align <subcommand> --config <path> [--set k=v ...] --out <dir>``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import InputError, ShapeError, StageError
from .solver import AssignmentSolution
from .stages import ARTIFACTS, STAGES, cmd_pipeline, run_stage

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STAGE = 3
EXIT_NODE_BUDGET = 4

SUBCOMMANDS = tuple(STAGES) + ("pipeline",)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sot-align", description="Entity alignment with dangling detection via semi-constraint OT.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("--out", required=True, help="artifact directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _exit_code(exc: StageError) -> int:
    return EXIT_INPUT if isinstance(exc.cause, (InputError, ShapeError, FileNotFoundError)) else EXIT_STAGE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
    except InputError as exc:
        print(f"sot-align: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.subcommand == "pipeline":
            cmd_pipeline(cfg, args.out)
            result = None
        else:
            result = run_stage(args.subcommand, cfg, args.out)
    except StageError as exc:
        print(f"sot-align: {exc}", file=sys.stderr)
        return _exit_code(exc)

    if args.subcommand in ("solve", "pipeline"):
        sol = result if args.subcommand == "solve" else AssignmentSolution.read(Path(args.out) / ARTIFACTS["solution"])
        if sol.status == "node_budget":
            print(f"sot-align: node budget exhausted after {sol.node_count} nodes", file=sys.stderr)
            return EXIT_NODE_BUDGET
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
