"""
Command-line entry point: spectra-lab <task> --config <path>
"""
import argparse
import logging
import sys
from typing import List, Optional

from spectra_lab import __version__
from spectra_lab.core.config import load_config
from spectra_lab.core.exceptions import ConfigError
from spectra_lab.core.logging_config import configure_logging
from spectra_lab.core.models import TaskName
from spectra_lab.core.settings import get_settings
from spectra_lab.runner import ExperimentRunner
from spectra_lab.services.report_service import emit_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTATION = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectra-lab",
        description="Finite-scale experiments on Schrödinger operators and compactness criteria",
    )
    parser.add_argument("task", choices=[t.value for t in TaskName])
    parser.add_argument("--config", required=True, help="YAML experiment config")
    parser.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    parser.add_argument("--format", choices=["csv", "json"], action="append", default=None, help="report format; repeatable")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(settings.log_level, settings.log_json)

    try:
        config = load_config(args.config, task=args.task)
        if args.seed is not None:
            config = config.model_copy(update={"seed": args.seed})
    except ConfigError as e:
        logger.error(str(e))
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.out or config.output.dir
    formats = args.format or config.output.format
    record = ExperimentRunner(config, out_dir=out_dir).run()
    try:
        emit_report(record, out_dir, formats)
    except OSError as e:
        logger.error(f"Could not write report to {out_dir}: {e}")
        return EXIT_COMPUTATION
    return EXIT_COMPUTATION if record.failed else EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
