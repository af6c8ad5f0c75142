"""
Checkpoint refinement pipeline.

Selects weight tensors by glob pattern, pairs each "<prefix>.weight" with its
"<prefix>.bias", applies singular value scaling layer by layer and returns
the refined checkpoint together with before/after spectrum reports.
Tensors that are not selected are carried over untouched.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

from .constants import (
    BIAS_SUFFIX,
    DEFAULT_HISTOGRAM_BINS,
    DEFAULT_HISTOGRAM_RANGE,
    DEFAULT_SIGMA_ZERO_TOL,
    WEIGHT_SUFFIX,
    atomic_write_bytes,
)
from .exceptions import (
    ConfigurationError,
    FileOperationError,
    LayerRefineError,
    NothingToRefineError,
    SvsRefineError,
)
from .scaling import ScalerKind, scale_pair
from .spectrum_report import (
    LayerReport,
    ReportFormat,
    build_layer_report,
    export_report,
    map_layers,
)
from .tensor_store import Checkpoint, Tensor, as_matrix, load_checkpoint, save_checkpoint
from .validation import (
    ValidationError,
    matches_any,
    validate_bins,
    validate_log_range,
    validate_patterns,
)

logger = logging.getLogger(__name__)


@dataclass
class RefineConfig:
    """Options for one refinement run."""

    scaler: ScalerKind = ScalerKind.SQRT
    include_bias: bool = True
    include_patterns: tuple = ("*",)
    exclude_patterns: tuple = ()
    min_rank_dims: int = 2
    sigma_zero_tol: float = DEFAULT_SIGMA_ZERO_TOL
    report_path: Optional[Path] = None
    bins: int = DEFAULT_HISTOGRAM_BINS
    hist_range: tuple = field(default=DEFAULT_HISTOGRAM_RANGE)
    workers: Optional[int] = None

    def __post_init__(self):
        try:
            self.scaler = ScalerKind(self.scaler)
        except ValueError as e:
            raise ConfigurationError(
                "Unknown scaler",
                config_key="scaler",
                config_value=self.scaler,
                original_error=e,
            ) from e
        try:
            self.include_patterns = validate_patterns(self.include_patterns)
            self.exclude_patterns = validate_patterns(self.exclude_patterns)
            self.bins = validate_bins(self.bins)
            self.hist_range = validate_log_range(*self.hist_range)
        except ValidationError as e:
            raise ConfigurationError("Invalid refine configuration", original_error=e) from e
        rank = self.min_rank_dims
        if isinstance(rank, bool) or not isinstance(rank, int) or rank < 2:
            raise ConfigurationError(
                "min_rank_dims must be an integer >= 2",
                config_key="min_rank_dims",
                config_value=self.min_rank_dims,
            )
        if not self.sigma_zero_tol >= 0:
            raise ConfigurationError(
                "sigma_zero_tol must be >= 0",
                config_key="sigma_zero_tol",
                config_value=self.sigma_zero_tol,
            )
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError(
                "workers must be >= 1", config_key="workers", config_value=self.workers
            )
        if self.report_path is not None:
            self.report_path = Path(self.report_path)


class LayerPair(NamedTuple):
    weight: str
    bias: Optional[str] = None
    warning: Optional[str] = None


class RefineResult(NamedTuple):
    checkpoint: Checkpoint
    reports: list


def pair_weight_bias(ckpt: Checkpoint) -> list:
    """Pair every rank >= 2 tensor with its "<prefix>.bias", name-sorted.

    A bias pairs only when it is rank-1 and its length equals the weight's
    first dimension; otherwise the weight is left unpaired with a warning.
    """
    pairs = []
    for name, tensor in ckpt.tensors.items():
        if tensor.rank < 2:
            continue
        if not name.endswith(WEIGHT_SUFFIX):
            pairs.append(LayerPair(name))
            continue
        bias_name = name[: -len(WEIGHT_SUFFIX)] + BIAS_SUFFIX
        bias = ckpt.tensors.get(bias_name)
        if bias is None:
            pairs.append(LayerPair(name))
        elif bias.rank == 1 and bias.shape[0] == tensor.shape[0]:
            pairs.append(LayerPair(name, bias_name))
        else:
            message = (
                f"bias {bias_name} shape {list(bias.shape)} does not match "
                f"{tensor.shape[0]} output channels, left unpaired"
            )
            logger.warning("%s: %s", name, message)
            pairs.append(LayerPair(name, warning=message))
    return pairs


def select_layers(ckpt: Checkpoint, cfg: RefineConfig) -> list:
    """Pairs whose weight passes the rank and include/exclude filters."""
    selected = [
        pair
        for pair in pair_weight_bias(ckpt)
        if ckpt.tensors[pair.weight].rank >= cfg.min_rank_dims
        and matches_any(pair.weight, cfg.include_patterns)
        and not matches_any(pair.weight, cfg.exclude_patterns)
    ]
    if not selected:
        raise NothingToRefineError(
            "nothing to refine", patterns=list(cfg.include_patterns)
        )
    return selected


def _refine_layer(ckpt: Checkpoint, pair: LayerPair, cfg: RefineConfig) -> tuple:
    weight = ckpt.tensors[pair.weight]
    refine_bias = (
        pair.bias is not None
        and cfg.include_bias
        and not matches_any(pair.bias, cfg.exclude_patterns)
    )
    try:
        bias_values = ckpt.tensors[pair.bias].to_array() if refine_bias else None
        scaled = scale_pair(
            as_matrix(weight),
            bias_values,
            cfg.scaler,
            include_bias=refine_bias,
            tol=cfg.sigma_zero_tol,
        )
    except (SvsRefineError, ValidationError) as e:
        raise LayerRefineError(
            "cannot refine layer",
            layer=pair.weight,
            original_error=e,
        ) from e

    updates = {
        pair.weight: Tensor.from_array(
            pair.weight, scaled.weight.reshape(weight.shape), weight.dtype
        )
    }
    if refine_bias:
        bias = ckpt.tensors[pair.bias]
        updates[pair.bias] = Tensor.from_array(pair.bias, scaled.bias, bias.dtype)

    warnings = ([pair.warning] if pair.warning else []) + list(scaled.warnings)
    if scaled.warnings:
        logger.warning(
            "%s: %d order warnings with %s, first: %s",
            pair.weight,
            len(scaled.warnings),
            cfg.scaler.value,
            scaled.warnings[0],
        )
    logger.debug(
        "Refined %s with %s%s",
        pair.weight,
        cfg.scaler.value,
        f" and {pair.bias}" if refine_bias else "",
    )

    report = build_layer_report(
        pair.weight,
        weight.shape,
        scaled.sigma_before,
        scaled.sigma_after,
        warnings,
        cfg.bins,
        cfg.hist_range,
    )
    return updates, report


def refine_checkpoint(ckpt: Checkpoint, cfg: Optional[RefineConfig] = None) -> RefineResult:
    """Apply the configured scaler to every selected layer of *ckpt*."""
    cfg = cfg or RefineConfig()
    pairs = {pair.weight: pair for pair in select_layers(ckpt, cfg)}
    results = map_layers(
        lambda name: _refine_layer(ckpt, pairs[name], cfg), list(pairs), cfg.workers
    )

    updates = {}
    reports: list[LayerReport] = []
    for name in sorted(results):
        layer_updates, report = results[name]
        updates.update(layer_updates)
        reports.append(report)
    logger.info("Refined %d layers with %s", len(reports), cfg.scaler.label)
    return RefineResult(ckpt.replace(updates), reports)


def write_report(reports, path) -> None:
    """Write reports to *path*, CSV for a .csv suffix and JSON otherwise."""
    path = Path(path)
    try:
        atomic_write_bytes(export_report(reports, ReportFormat.for_path(path)), path)
    except OSError as e:
        raise FileOperationError(
            "Cannot write report", file_path=str(path), operation="write", original_error=e
        ) from e
    logger.info("Wrote report %s", path)


def refine_file(input_path, output_path, cfg: Optional[RefineConfig] = None) -> RefineResult:
    """Read a checkpoint, refine it, write the result and the optional report."""
    cfg = cfg or RefineConfig()
    result = refine_checkpoint(load_checkpoint(input_path), cfg)
    save_checkpoint(result.checkpoint, output_path)
    if cfg.report_path is not None:
        write_report(result.reports, cfg.report_path)
    return result
