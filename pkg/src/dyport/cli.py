"""Command-line entry point.

Each subcommand runs the pipeline through its stage, reusing cached
artifacts for everything upstream, so `dyport run` and a sequence of
per-stage invocations produce the same outputs. Exit codes: 0 on
success, 1 for input or configuration problems, 2 for internal errors.
Progress goes to stderr; stdout stays clean for scripting.
"""

from __future__ import annotations

import argparse
import logging
import sys

from dyport import __version__
from dyport.config import load_run_config
from dyport.errors import DyportError, ValidationError
from dyport.pipeline import StageError, export_snapshot, run_pipeline

log = logging.getLogger("dyport")

STAGE_COMMANDS = (
    ("ingest", "parse and validate the corpus, writing the bundled form"),
    ("snapshot", "materialize the yearly graph snapshots"),
    ("train", "fit the predictors on the training cut"),
    ("attribute", "score each known edge's contribution to upcoming links"),
    ("importance", "build the combined importance table for discovered edges"),
    ("evaluate", "sample negatives and score every evaluation pair"),
    ("report", "write the stratified performance reports"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyport",
        description="benchmark link prediction over time-sliced concept graphs",
    )
    parser.add_argument("--version", action="version", version=f"dyport {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="path to the key=value run file")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", default=None, type=int, help="master seed (overrides config)")
        p.add_argument(
            "overrides",
            nargs="*",
            metavar="key=value",
            help="config entries to override",
        )
        p.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    for name, help_text in STAGE_COMMANDS:
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        if name == "snapshot":
            p.add_argument(
                "--year",
                type=int,
                default=None,
                help="export just this year's snapshot",
            )

    p = sub.add_parser("run", help="run every stage through the final report")
    add_common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        cfg = load_run_config(
            args.config, overrides=args.overrides, out_dir=args.out, seed=args.seed
        )
    except DyportError as exc:
        log.error("%s", exc)
        return 1
    if args.command == "snapshot" and args.year is not None:
        try:
            arts = export_snapshot(cfg, args.year)
        except DyportError as exc:
            log.error("%s", exc)
            return 1
        for name in arts:
            print(name)
        return 0
    upto = "report" if args.command == "run" else args.command
    try:
        ledger = run_pipeline(cfg, upto=upto)
    except StageError as exc:
        log.error("%s", exc)
        return 1 if exc.is_validation else 2
    except DyportError as exc:
        log.error("%s", exc)
        return 1
    for entry in ledger["stages"]:
        line = f"{entry['stage']}: {entry['status']} ({entry['wall_time_s']}s)"
        print(line)
    print(f"config hash {ledger['config_hash']}, outputs in {cfg.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
