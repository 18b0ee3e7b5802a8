"""Command-line front-end: `run` for the whole pipeline plus one subcommand per stage."""

import argparse
import sys
from typing import List, Optional

from config.registry import AUDITS, DEFAULT_GENERATOR, GENERATORS
from config.settings import DEFAULT_F_SAMPLES, EXIT_ERROR, validate_threads
from core.errors import WhitneyExtError
from utils.logging_utils import Logger

from cli.commands import COMMANDS, configure_runtime


def _threads(value: str) -> int:
    ok, threads = validate_threads(value)
    if not ok:
        raise argparse.ArgumentTypeError(f"invalid thread count '{value}'")
    return threads


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for every sampled quantity")
    common.add_argument("--threads", type=_threads, default=None, help="numba worker threads")
    common.add_argument("--sequential", action="store_true", help="use the sequential kernels")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--debug", action="store_true", help="extended debug logging")
    common.add_argument("--quiet", action="store_true", help="no console output")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="whitneyext",
        description="Whitney-type extension on finite metric measure spaces, with constant audits.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    run = sub.add_parser("run", parents=[common], help="run the full pipeline from a JSON configuration")
    run.add_argument("--config", required=True, help="run configuration (JSON)")

    gen = sub.add_parser("gen-space", parents=[common], help="generate a space and subset mask")
    gen.add_argument("--generator", default=DEFAULT_GENERATOR, choices=sorted(GENERATORS))
    gen.add_argument("--param", action="append", metavar="KEY=VALUE",
                     help="generator parameter, JSON value (repeatable)")

    def with_space(p):
        p.add_argument("--space", required=True, help="space dump (mms v1)")
        p.add_argument("--mask", required=True, help="subset mask (mask v1)")
        return p

    est = with_space(sub.add_parser("estimate", parents=[common], help="doubling and regularity constants"))
    est.add_argument("--delta", default="auto", help="regularity scale or 'auto'")

    cov = with_space(sub.add_parser("cover", parents=[common], help="build and verify the Whitney cover"))
    cov.add_argument("--cover", default=None, help="verify this cover dump instead of building one")

    ext = with_space(sub.add_parser("extend", parents=[common], help="quasi-balls, partition and extension"))
    ext.add_argument("--cover", required=True, help="Whitney cover dump")
    ext.add_argument("--delta", default="auto", help="regularity scale or 'auto'")
    ext.add_argument("--epsilon", default="auto", help="quasi-ball epsilon in (0, 1] or 'auto'")
    source = ext.add_mutually_exclusive_group()
    source.add_argument("--u", default=None, help="field dump of u on S")
    source.add_argument("--input", default=None, help='input function as JSON, e.g. {"name": "constant"}')

    aud = with_space(sub.add_parser("audit", parents=[common], help="audit an extension from dumps"))
    aud.add_argument("--cover", required=True)
    aud.add_argument("--family", required=True)
    aud.add_argument("--u", required=True)
    aud.add_argument("--g", default=None, help="generalized gradient on S (default: canonical)")
    aud.add_argument("--p", default="2")
    aud.add_argument("--alpha", default="0.5")
    aud.add_argument("--audits", nargs="+", choices=sorted(AUDITS), default=None)
    aud.add_argument("--f-samples", type=int, default=DEFAULT_F_SAMPLES)

    rep = sub.add_parser("report", parents=[common], help="merge audit CSVs of several runs")
    rep.add_argument("inputs", nargs="+", help="audits.csv files or run directories")
    return parser


def _normalise_argv(argv: List[str]) -> List[str]:
    # `whitneyext --config x.json` is shorthand for `whitneyext run --config x.json`
    if argv and argv[0].startswith("-") and "--config" in argv:
        return ["run"] + argv
    return argv


def main(argv: Optional[List[str]] = None) -> int:
    argv = _normalise_argv(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else 0

    logger = Logger(debug_mode=args.debug, quiet=args.quiet)
    if args.debug:
        logger.debug("Extended debug mode enabled")
    try:
        if args.command != "run":
            configure_runtime(args, logger)
        return COMMANDS[args.command](args, logger)
    except (WhitneyExtError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed", e)
        return EXIT_ERROR
