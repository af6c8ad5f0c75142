#!/usr/bin/env python3
"""
svs-refine command-line launcher

Subcommands:
  inspect  spectrum report of one checkpoint
  refine   apply singular value scaling to a checkpoint
  diff     before/after spectrum report of two checkpoints
  bench    toy convergence benchmark

Reports go to stdout unless --output is given; logs and diagnostics go to
stderr.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

if not __package__:  # direct script execution
    sys.path.insert(0, str(Path(__file__).resolve().parents[2]))
    import svs_refine.cli  # noqa: F401

    __package__ = "svs_refine.cli"

from ..benchmark.engine import load_config, run_comparison, run_sweep, write_results
from ..constants import (
    DEFAULT_HISTOGRAM_BINS,
    DEFAULT_HISTOGRAM_RANGE,
    DEFAULT_LOG_LEVEL,
    EXIT_IOERR,
    EXIT_OK,
    EXIT_SHAPE_MISMATCH,
    EXIT_SOFTWARE,
    EXIT_USAGE,
    LOG_FORMAT,
    PACKAGED_BENCH_CONFIG_PATH,
    atomic_write_bytes,
)
from ..exceptions import (
    CheckpointError,
    ConfigurationError,
    FileOperationError,
    PruningError,
    SelectionError,
    ShapeMismatchError,
    SvsRefineError,
    TrainingError,
)
from ..refine_pipeline import RefineConfig, refine_file
from ..spectrum_report import (
    ReportFormat,
    compare_checkpoints,
    export_report,
    inspect_checkpoint,
)
from ..tensor_store import load_checkpoint
from ..validation import ValidationError

logger = logging.getLogger("svs_refine.cli")

PROG = "svs-refine"


class _UsageExit(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(message)


def _positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value!r}")
    return number


def _add_report_options(parser: argparse.ArgumentParser) -> None:
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    parser.add_argument(
        "--bins",
        type=_positive_int,
        default=DEFAULT_HISTOGRAM_BINS,
        help=f"Histogram bins (default: {DEFAULT_HISTOGRAM_BINS})",
    )
    parser.add_argument(
        "--range",
        nargs=2,
        type=float,
        metavar=("LO", "HI"),
        default=DEFAULT_HISTOGRAM_RANGE,
        help="Histogram range in log10(sigma) (default: %(default)s)",
    )
    parser.add_argument(
        "--output", "-o", type=Path, help="Write the report here instead of stdout"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog=PROG,
        description="Singular value scaling and spectrum reports for checkpoints",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Refine a pruned checkpoint with the square-root scaler
  svs-refine refine pruned.safetensors refined.safetensors --report report.json

  # Compare spectra before and after
  svs-refine diff pruned.safetensors refined.safetensors --csv -o diff.csv

  # Run the toy convergence benchmark over the sparsity sweep
  svs-refine bench --sweep --output-dir bench-results
        """,
    )
    parser.add_argument(
        "--log-level",
        default=DEFAULT_LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help=f"Logging level (default: {DEFAULT_LOG_LEVEL})",
    )
    parser.add_argument(
        "--threads",
        type=_positive_int,
        help="Worker bound for per-layer parallelism (sets SVS_THREADS)",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    inspect = sub.add_parser("inspect", help="Spectrum report of one checkpoint")
    inspect.add_argument("checkpoint", type=Path)
    inspect.add_argument(
        "--filter", action="append", dest="filters", metavar="P", help="Layer glob"
    )
    inspect.add_argument(
        "--pooled", action="store_true", help="Add a report over all selected layers"
    )
    _add_report_options(inspect)

    refine = sub.add_parser("refine", help="Scale singular values of selected layers")
    refine.add_argument("input", type=Path)
    refine.add_argument("output", type=Path)
    refine.add_argument(
        "--scaler",
        default="sqrt",
        choices=["sqrt", "log1p", "abslog", "square", "normalize", "specnorm", "identity"],
        help="Scaling function (default: sqrt)",
    )
    refine.add_argument("--no-bias", action="store_true", help="Leave biases untouched")
    refine.add_argument(
        "--include", action="append", metavar="P", help="Weight glob to refine"
    )
    refine.add_argument(
        "--exclude", action="append", metavar="P", help="Tensor glob to skip"
    )
    refine.add_argument(
        "--report", type=Path, help="Write a JSON (or .csv) spectrum report"
    )
    refine.add_argument("--bins", type=_positive_int, default=DEFAULT_HISTOGRAM_BINS)
    refine.add_argument(
        "--range",
        nargs=2,
        type=float,
        metavar=("LO", "HI"),
        default=DEFAULT_HISTOGRAM_RANGE,
    )

    diff = sub.add_parser("diff", help="Before/after spectrum report")
    diff.add_argument("before", type=Path)
    diff.add_argument("after", type=Path)
    diff.add_argument(
        "--filter", action="append", dest="filters", metavar="P", help="Layer glob"
    )
    _add_report_options(diff)

    bench = sub.add_parser("bench", help="Toy convergence benchmark")
    bench.add_argument(
        "--config",
        type=Path,
        default=PACKAGED_BENCH_CONFIG_PATH,
        help="Benchmark YAML config (default: packaged config.yaml)",
    )
    bench.add_argument(
        "--sweep", action="store_true", help="Run every sparsity in sweep_sparsities"
    )
    bench.add_argument(
        "--output-dir",
        type=Path,
        default=Path("bench-results"),
        help="Directory for curves CSV and summary JSON (default: bench-results)",
    )
    return parser


def _emit(data: bytes, output) -> None:
    if output is None:
        sys.stdout.write(data.decode("utf-8"))
        sys.stdout.flush()
        return
    try:
        atomic_write_bytes(data, output)
    except OSError as e:
        raise FileOperationError(
            "Cannot write report",
            file_path=str(output),
            operation="write",
            original_error=e,
        ) from e
    logger.info("Wrote report %s", output)


def _report_format(args) -> ReportFormat:
    if args.fmt:
        return ReportFormat(args.fmt)
    if args.output is not None:
        return ReportFormat.for_path(args.output)
    return ReportFormat.JSON


def _cmd_inspect(args) -> int:
    reports = inspect_checkpoint(
        load_checkpoint(args.checkpoint),
        layer_filter=args.filters or ("*",),
        bins=args.bins,
        value_range=tuple(args.range),
        pooled=args.pooled,
    )
    _emit(export_report(reports, _report_format(args)), args.output)
    return EXIT_OK


def _cmd_refine(args) -> int:
    cfg = RefineConfig(
        scaler=args.scaler,
        include_bias=not args.no_bias,
        include_patterns=tuple(args.include or ("*",)),
        exclude_patterns=tuple(args.exclude or ()),
        report_path=args.report,
        bins=args.bins,
        hist_range=tuple(args.range),
    )
    result = refine_file(args.input, args.output, cfg)
    for report in result.reports:
        print(
            f"{report.layer_name}: condition {report.before.condition:.6g} -> "
            f"{report.after.condition:.6g}"
        )
    print(f"Refined {len(result.reports)} layers into {args.output}")
    return EXIT_OK


def _cmd_diff(args) -> int:
    reports = compare_checkpoints(
        load_checkpoint(args.before),
        load_checkpoint(args.after),
        layer_filter=args.filters or ("*",),
        bins=args.bins,
        value_range=tuple(args.range),
    )
    _emit(export_report(reports, _report_format(args)), args.output)
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    reports = run_sweep(cfg) if args.sweep else [run_comparison(cfg)]
    written = write_results(reports if args.sweep else reports[0], args.output_dir)
    for report in reports:
        medians = ", ".join(f"{k}={v:.4g}" for k, v in report.median_final_loss.items())
        print(
            f"sparsity {report.sparsity:g}: median final loss {medians}; "
            f"scaled beats pruned: {report.scaled_beats_pruned}"
        )
    for path in written:
        print(f"Wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "inspect": _cmd_inspect,
    "refine": _cmd_refine,
    "diff": _cmd_diff,
    "bench": _cmd_bench,
}

_USAGE_ERRORS = (
    ConfigurationError,
    SelectionError,
    ValidationError,
    PruningError,
    TrainingError,
)


def exit_code_for(error: BaseException) -> int:
    """Map an exception onto the CLI exit code contract."""
    if isinstance(error, ShapeMismatchError):
        return EXIT_SHAPE_MISMATCH
    if isinstance(error, (FileOperationError, CheckpointError, OSError)):
        return EXIT_IOERR
    if isinstance(error, _USAGE_ERRORS):
        return EXIT_USAGE
    return EXIT_SOFTWARE


def main(argv=None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as e:
        print(f"{PROG}: error: {e.message}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    if args.threads:
        os.environ["SVS_THREADS"] = str(args.threads)

    try:
        return _COMMANDS[args.command](args)
    except (SvsRefineError, ValidationError, OSError) as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
