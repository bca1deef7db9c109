"""
Command-line entry point: `trafficboost <command> [options]`.

Failures print one line `error=<ClassName> message=<text>` to stderr and exit with status 2.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from ..data.base import TrafficBoostError
from . import commands
from .config import PipelineConfig, SyntheticSpec

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
EXIT_ERROR = 2


def setup_logging(level: str = "INFO", log_file: Optional[Path] = None) -> None:
    """Configure console (stderr) and optional file logging for the CLI process"""
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    root = logging.getLogger()
    root.handlers.clear()
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, handlers=handlers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficboost",
        description="Two-stage gradient boosting for traffic congestion classes and ETAs",
    )
    parser.add_argument(
        "--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"]
    )
    parser.add_argument("--log-file", type=Path, default=None, help="Also log to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synthesize", help="Generate a synthetic city and its config")
    synth.add_argument("--out", type=Path, required=True, help="Directory to create")
    synth.add_argument("--seed", type=int, default=None)
    synth.add_argument("--city", default=None)
    synth.add_argument("--weeks", type=int, default=None, help="Calendar weeks to generate")
    synth.add_argument("--noise", type=float, default=None, help="Volume noise fraction")

    for name, text in (
        ("ingest-check", "Validate every input file"),
        ("train", "Train both stages and write the model bundle"),
        ("predict", "Write contexts, class probabilities and ETAs"),
        ("evaluate", "Score the two-stage pipeline on the held-out weeks"),
        ("ablate", "Score every ablation condition on the held-out weeks"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", type=Path, required=True, help="JSON or TOML config")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--city", default=None)
        cmd.add_argument("--out", type=Path, default=None, help="Output directory")
        if name == "predict":
            cmd.add_argument(
                "--snapshots", type=Path, default=None,
                help="Snapshot file to predict (defaults to the held-out weeks)",
            )
    return parser


def _run(args: argparse.Namespace) -> None:
    if args.command == "synthesize":
        overrides = {"seed": args.seed, "city": args.city, "weeks": args.weeks, "noise": args.noise}
        spec = SyntheticSpec.model_validate({k: v for k, v in overrides.items() if v is not None})
        config = commands.synthesize(spec, args.out)
        logger.info("Synthetic city '%s' ready in %s", config.city, args.out)
        return

    config = PipelineConfig.load(args.config).override(
        seed=args.seed, city=args.city, out_dir=args.out
    )
    match args.command:
        case "ingest-check":
            commands.ingest_check(config)
        case "train":
            commands.train(config)
        case "predict":
            commands.predict(config, args.snapshots)
        case "evaluate":
            report = commands.evaluate(config)
            logger.info("Evaluation: %s", report.to_flat())
        case "ablate":
            report = commands.ablate(config)
            logger.info("Ablation deltas: %s", report.deltas)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    try:
        _run(args)
    except (TrafficBoostError, ValidationError) as e:
        message = " ".join(str(e).split())
        print(f"error={type(e).__name__} message={message}", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
