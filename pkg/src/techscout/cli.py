"""Command-line front end for the patent trend pipeline.

Each subcommand runs one pipeline stage against an output directory, and
`run` executes the whole chain. Configuration comes from a JSON config file
with individual command-line flag overrides on top.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, RunConfig
from .pipeline import STAGES, StageError, run_pipeline, run_stage

LOGGER = logging.getLogger(__name__)


def _parse_window(text: str) -> tuple[int, int]:
    try:
        start, _, end = text.partition(":")
        return (int(start), int(end))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"window must look like 2019:2023, got {text!r}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="techscout",
        description="Label patents, extract topics, and flag growing label-topic cells.",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    descriptions = {
        "ingest": "validate the input corpus and write the normalized records",
        "label": "score documents and assign category labels",
        "topics": "fit the topic model over in-scope documents",
        "map": "cross-tabulate labels against topics by filing year",
        "trend": "fit per-cell trend lines and rank opportunities",
        "name": "name topics via the chat provider or offline fallback",
        "report": "render report tables and figures from artifacts",
        "run": "run every stage in order",
    }
    for command in list(STAGES) + ["run"]:
        sub = subparsers.add_parser(command, help=descriptions[command])
        sub.add_argument("--config", help="JSON config file")
        sub.add_argument("--input", help="input corpus path")
        sub.add_argument("--format", choices=("csv", "jsonl"), help="input format")
        sub.add_argument("--scores", help="stored logits JSONL for the scorer")
        sub.add_argument("--seed", type=int, help="run seed")
        sub.add_argument("--gamma", type=float, help="label probability threshold")
        sub.add_argument(
            "--window", type=_parse_window, help="analysis window, e.g. 2019:2023"
        )
        sub.add_argument("--provider-url", help="embedding/chat provider base URL")
        sub.add_argument("--no-chat", action="store_true", help="skip the chat provider")
        sub.add_argument("--out", help="output directory")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Layer config sources: defaults, then config file, then flags."""
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig()
    overrides = {
        "input_path": args.input,
        "input_format": args.format,
        "scorer_path": args.scores,
        "seed": args.seed,
        "gamma": args.gamma,
        "window": args.window,
        "provider_url": args.provider_url,
        "out_dir": args.out,
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(config, name, value)
    if args.no_chat:
        config.use_chat = False
    config.validate()
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = load_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "run":
            report = run_pipeline(config)
            print(json.dumps(report["stages"], indent=2, sort_keys=True))
        else:
            outcome = run_stage(args.command, config)
            print(json.dumps(outcome, indent=2, sort_keys=True))
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
