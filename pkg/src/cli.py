"""Command-line front end: figure sweeps, validation, CRLB study and single-point EC."""

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, Optional, TextIO

from src import __version__
from src.config import get_settings
from src.config.experiment import ExperimentConfig, load_config
from src.core.errors import ConfigError, DomainError, ModeMismatchError, ParameterError
from src.core.params import FfUpperLimit, MgfMode, ProbMode
from src.logger import LoggingInterceptor, close_file_logger, init_file_logger
from src.metrics import MetricsInterceptor, export_metrics
from src.services.experiments import ExperimentService, SweepTable

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

USAGE_ERRORS = (ParameterError, ConfigError, ModeMismatchError, DomainError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nffec",
        description="Effective capacity of a joint near-field/far-field link under ranging uncertainty",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="Output file (stdout when omitted)")
    common.add_argument("--seed", type=int, help="Monte Carlo seed (u64)")
    common.add_argument("--samples", type=int, help="Monte Carlo slots per estimate")
    common.add_argument(
        "--paper-literal",
        action="store_true",
        help="Use the printed probability and MGF expressions instead of the consistent pair",
    )
    common.add_argument(
        "--extended-ff-limit",
        action="store_true",
        help="Integrate FF estimate regions up to d + 10 sigma_d instead of d_max",
    )
    common.add_argument("--workers", type=int, help="Thread pool size for sweep points")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("fig2", parents=[common], help="False-far / false-near probability vs sigma_d")
    commands.add_parser("fig3", parents=[common], help="EC vs cell radius d_max")
    commands.add_parser("fig4", parents=[common], help="EC vs NF boundary d_F")
    commands.add_parser("fig5", parents=[common], help="EC vs sigma_d")
    commands.add_parser("validate", parents=[common], help="Analytics against the Monte Carlo oracle")
    commands.add_parser("crlb", parents=[common], help="ToA estimator variance against the CRLB")
    commands.add_parser("ec", parents=[common], help="Single-point EC with diagnostics as JSON")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Load the configuration file and apply the mode flags."""
    config = load_config(args.config)
    overrides = {}
    if args.paper_literal:
        overrides["prob_mode"] = ProbMode.PAPER_LITERAL
        overrides["mgf_mode"] = MgfMode.PAPER_LITERAL
    if args.extended_ff_limit:
        overrides["ff_mgf_upper"] = FfUpperLimit.EXTENDED
    return config.with_params(**overrides)


@contextmanager
def open_output(path: Optional[str]) -> Iterator[TextIO]:
    if path is None:
        yield sys.stdout
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as handle:
        yield handle
    logger.info(f"Wrote {target}")


def _service(args: argparse.Namespace) -> ExperimentService:
    return ExperimentService(resolve_config(args), samples=args.samples, seed=args.seed, workers=args.workers)


def _table_command(run: Callable[[ExperimentService], SweepTable]) -> Callable[[argparse.Namespace], int]:
    def handler(args: argparse.Namespace) -> int:
        table = run(_service(args))
        with open_output(args.out) as handle:
            table.write(handle)
        return EXIT_OK

    return handler


def run_validate(args: argparse.Namespace) -> int:
    report = _service(args).run_validate()
    sys.stdout.write(report.to_text())
    if args.out is not None:
        with open_output(args.out) as handle:
            json.dump(report.to_dict(), handle, indent=2)
            handle.write("\n")
    if not report.ok:
        names = ", ".join(c.name for c in report.failures)
        logger.error(f"Validation failed: {names}")
        return EXIT_CHECK_FAILED
    return EXIT_OK


def run_ec(args: argparse.Namespace) -> int:
    document = _service(args).run_ec()
    with open_output(args.out) as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "fig2": _table_command(ExperimentService.run_fig2),
    "fig3": _table_command(ExperimentService.run_fig3),
    "fig4": _table_command(ExperimentService.run_fig4),
    "fig5": _table_command(ExperimentService.run_fig5),
    "crlb": _table_command(ExperimentService.run_crlb),
    "validate": run_validate,
    "ec": run_ec,
}


def _guarded(handler: Callable[[argparse.Namespace], int]) -> Callable[[argparse.Namespace], int]:
    """Map configuration problems to exit code 2."""

    def wrapper(args: argparse.Namespace) -> int:
        try:
            return handler(args)
        except USAGE_ERRORS as e:
            logger.error(f"{type(e).__name__}: {e}")
            return EXIT_CONFIG_ERROR

    return wrapper


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()

    logging.basicConfig(level=settings.log_level.upper(), format=settings.log_format)
    if settings.trace_enabled:
        init_file_logger(service_name=settings.service_name, log_dir=settings.log_dir)

    arguments = {k: v for k, v in vars(args).items() if k != "command"}
    handler = LoggingInterceptor().wrap(args.command, _guarded(COMMANDS[args.command]), arguments)
    handler = MetricsInterceptor(service_name=settings.service_name).wrap(args.command, handler)

    try:
        return handler(args)
    except Exception:
        logger.exception(f"Command {args.command} failed")
        raise
    finally:
        close_file_logger()
        if settings.metrics_textfile:
            export_metrics(settings.metrics_textfile, settings.service_name, __version__)


if __name__ == "__main__":
    sys.exit(main())
