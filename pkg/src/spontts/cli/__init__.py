"""Command-line interface.

Failures print exactly one line to stderr, ``spontts-error[<kind>]: <message>``,
and exit with status 1 (2 for argument errors, as argparse does).
"""

from __future__ import annotations

import argparse
import sys

from ..adaptation import CheckpointError, StageOrderError, TrainingError
from ..corpus import DataError, FpSequenceError, OOVError, ParseError
from ..model import ContractError, VocabularyError
from ..numerics.ops import ConfigError
from .commands import COMMANDS
from .config import resolve_config

ERROR_KINDS = (
    (StageOrderError, "stage-order"),
    (ParseError, "parse"),
    (OOVError, "oov"),
    (VocabularyError, "vocabulary"),
    (FpSequenceError, "data"),
    (DataError, "data"),
    (CheckpointError, "checkpoint"),
    (ConfigError, "config"),
    (ContractError, "contract"),
    (TrainingError, "training"),
    (FileNotFoundError, "missing-input"),
    (OSError, "io"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spontts", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. --set source.steps=100")
    common.add_argument("--seed", type=int, help="shorthand for --set run.seed=N")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", parents=[common], help="build SPON-FP/RHYTHM/TIMBRE datasets")
    p.add_argument("--transcripts", nargs="+", help="FP-marked transcript files")
    p.add_argument("--corpus", help="aligned spontaneous corpus directory")
    p.add_argument("--lexicon", help="pronunciation lexicon (defaults to the bundled one)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth-corpus", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--profile", choices=["reading", "spontaneous"])
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", parents=[common], help="source model training")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    for name, data_help in (("adapt-fp", "SPON-FP dataset"), ("adapt-rhythm", "SPON-RHYTHM corpus"),
                            ("adapt-speaker", "SPON-TIMBRE corpus")):
        p = sub.add_parser(name, parents=[common], help=f"adaptation stage on a {data_help}")
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True, help=data_help)
        p.add_argument("--out", required=True)
        if name == "adapt-speaker":
            p.add_argument("--speaker", help="target speaker id (new ids get a fresh embedding row)")

    p = sub.add_parser("synth", parents=[common], help="synthesize mel frames")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text")
    p.add_argument("--phonemes", help="space-separated phoneme symbols")
    p.add_argument("--lexicon")
    p.add_argument("--speaker")
    p.add_argument("--threshold", type=float, help="FP threshold T")
    p.add_argument("--no-fp", action="store_true", help="disable FP prediction")
    p.add_argument("--name", default="utterance")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval-fp", parents=[common], help="FP threshold sweep")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="held-out SPON-FP dataset")
    p.add_argument("--thresholds", help="comma-separated list (default grid from config)")
    p.add_argument("--out", required=True, help="CSV path")

    p = sub.add_parser("report", parents=[common], help="duration or training-log summary")
    p.add_argument("--corpus")
    p.add_argument("--log")
    p.add_argument("--out")
    return parser


def error_kind(exc: BaseException) -> str:
    for cls, kind in ERROR_KINDS:
        if isinstance(exc, cls):
            return kind
    return "internal"


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"run.seed={args.seed}")
        config = resolve_config(args.config, overrides)
        output = COMMANDS[args.command](args, config)
    except Exception as exc:  # one machine-parsable line, no traceback
        message = " ".join(str(exc).split())
        print(f"spontts-error[{error_kind(exc)}]: {message}", file=sys.stderr)
        return 1
    if output:
        print(output)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
