"""
Singular-value diagnostics for checkpoints.

Computes per-layer spectra, condition numbers and log-spaced histograms, for
a single checkpoint or a before/after pair, and exports them as JSON or CSV.

JSON schema (one object per layer, keys in this order)::

    layer_name         string
    shape              list of int ([] for the pooled report)
    before, after      stats object or null (after only)
    histogram_before   histogram object
    histogram_after    histogram object or null
    warnings           list of string

    stats:      sigma_max, sigma_min, condition, log10_gap, stable_rank, count
    histogram:  lo, hi, bins, counts, underflow, overflow, total

Infinite ``condition``/``log10_gap`` values are written as the string "inf".

CSV columns are listed in CSV_COLUMNS. Each layer yields one row per
histogram bin (``record=bin``, including the underflow and overflow buckets)
for each available phase, then a single ``record=summary`` row.
"""

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .constants import (
    DEFAULT_HISTOGRAM_BINS,
    DEFAULT_HISTOGRAM_RANGE,
    POOLED_LAYER_NAME,
    worker_count,
)
from .exceptions import ShapeMismatchError
from .svd_core import svd
from .tensor_store import Checkpoint, Tensor, as_matrix
from .validation import (
    ValidationError,
    matches_any,
    validate_bins,
    validate_log_range,
    validate_patterns,
    validate_vector,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "layer",
    "record",
    "phase",
    "bin",
    "log10_lo",
    "log10_hi",
    "count",
    "sigma_count",
    "before_sigma_max",
    "before_sigma_min",
    "before_condition",
    "after_sigma_max",
    "after_sigma_min",
    "after_condition",
)


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"

    @classmethod
    def for_path(cls, path) -> "ReportFormat":
        """CSV for a .csv suffix, JSON otherwise."""
        return cls.CSV if str(path).lower().endswith(".csv") else cls.JSON


@dataclass(frozen=True)
class SpectrumStats:
    sigma_max: float
    sigma_min: float
    condition: float  # math.inf when sigma_min == 0
    log10_gap: float
    stable_rank: float
    count: int

    @property
    def condition_infinite(self) -> bool:
        return math.isinf(self.condition)


@dataclass(frozen=True)
class Histogram:
    """Bin counts of log10(sigma) over [lo, hi] plus out-of-range buckets."""

    counts: tuple
    underflow: int
    overflow: int
    lo: float
    hi: float

    @property
    def bins(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow

    def edges(self) -> list:
        width = (self.hi - self.lo) / self.bins
        return [self.lo + i * width for i in range(self.bins)] + [self.hi]


@dataclass(frozen=True)
class LayerReport:
    layer_name: str
    shape: tuple
    before: SpectrumStats
    histogram_before: Histogram
    after: Optional[SpectrumStats] = None
    histogram_after: Optional[Histogram] = None
    warnings: tuple = field(default_factory=tuple)


def compute_stats(sigma) -> SpectrumStats:
    """Extreme singular values, condition number and gap of a sorted spectrum."""
    sigma = validate_vector(sigma, "sigma")
    if sigma.size == 0:
        raise ValidationError("Cannot compute statistics of an empty spectrum")
    if np.any(sigma < 0):
        raise ValidationError("Singular values must be non-negative")
    if np.any(np.diff(sigma) > 0):
        raise ValidationError("Singular values must be non-increasing")

    sigma_max, sigma_min = float(sigma[0]), float(sigma[-1])
    if sigma_min > 0:
        condition = sigma_max / sigma_min
        log10_gap = math.log10(condition)
    else:
        condition = log10_gap = math.inf
    stable_rank = 0.0
    if sigma_max > 0:
        stable_rank = float(np.sum(sigma * sigma) / (sigma_max * sigma_max))
    return SpectrumStats(
        sigma_max=sigma_max,
        sigma_min=sigma_min,
        condition=condition,
        log10_gap=log10_gap,
        stable_rank=stable_rank,
        count=int(sigma.size),
    )


def histogram(
    sigma, bins: int = DEFAULT_HISTOGRAM_BINS, value_range=DEFAULT_HISTOGRAM_RANGE
) -> Histogram:
    """Bin log10(sigma) into equal-width bins over value_range.

    Bins are left-closed and right-open except the last, which is closed.
    Zeros and values below lo land in underflow, values above hi in overflow.
    """
    bins = validate_bins(bins)
    lo, hi = validate_log_range(*value_range)
    sigma = validate_vector(sigma, "sigma")
    if np.any(sigma < 0):
        raise ValidationError("Singular values must be non-negative")

    positive = sigma[sigma > 0]
    x = np.log10(positive)
    below = x < lo
    above = x > hi
    inside = x[~below & ~above]
    index = np.floor((inside - lo) * bins / (hi - lo)).astype(np.int64)
    index = np.clip(index, 0, bins - 1)
    counts = np.bincount(index, minlength=bins)
    return Histogram(
        counts=tuple(int(c) for c in counts),
        underflow=int(sigma.size - positive.size + below.sum()),
        overflow=int(above.sum()),
        lo=lo,
        hi=hi,
    )


def _descending(sigma) -> np.ndarray:
    return np.sort(np.asarray(sigma, dtype=np.float64))[::-1]


def build_layer_report(
    layer_name: str,
    shape: Sequence[int],
    sigma_before,
    sigma_after=None,
    warnings: Iterable[str] = (),
    bins: int = DEFAULT_HISTOGRAM_BINS,
    value_range=DEFAULT_HISTOGRAM_RANGE,
) -> LayerReport:
    """Assemble a report; spectra are sorted first since stats ignore position."""
    after = hist_after = None
    if sigma_after is not None:
        after = compute_stats(_descending(sigma_after))
        hist_after = histogram(sigma_after, bins, value_range)
    return LayerReport(
        layer_name=layer_name,
        shape=tuple(shape),
        before=compute_stats(_descending(sigma_before)),
        histogram_before=histogram(sigma_before, bins, value_range),
        after=after,
        histogram_after=hist_after,
        warnings=tuple(warnings),
    )


def map_layers(fn: Callable, names: Sequence[str], workers: Optional[int] = None) -> dict:
    """Run *fn* over layer names concurrently; return results keyed by name.

    Exceptions propagate from the first failing name in sorted order.
    """
    names = sorted(names)
    workers = workers or worker_count()
    if workers <= 1 or len(names) <= 1:
        return {name: fn(name) for name in names}
    with ThreadPoolExecutor(max_workers=min(workers, len(names))) as pool:
        futures = {name: pool.submit(fn, name) for name in names}
        return {name: futures[name].result() for name in names}


def tensor_spectrum(t: Tensor) -> np.ndarray:
    return svd(as_matrix(t)).sigma


def _selected_matrices(ckpt: Checkpoint, patterns: Sequence[str]) -> list:
    return [
        name
        for name, tensor in ckpt.tensors.items()
        if tensor.rank >= 2 and matches_any(name, patterns)
    ]


def inspect_checkpoint(
    ckpt: Checkpoint,
    layer_filter: Sequence[str] = ("*",),
    bins: int = DEFAULT_HISTOGRAM_BINS,
    value_range=DEFAULT_HISTOGRAM_RANGE,
    pooled: bool = False,
    workers: Optional[int] = None,
) -> list:
    """Spectrum reports for every matrix-like tensor matching *layer_filter*.

    With ``pooled`` an extra report named "<pooled>" covers all selected
    spectra together.
    """
    patterns = validate_patterns(layer_filter)
    names = _selected_matrices(ckpt, patterns)
    spectra = map_layers(lambda name: tensor_spectrum(ckpt.tensors[name]), names, workers)
    reports = [
        build_layer_report(
            name, ckpt.tensors[name].shape, spectra[name], bins=bins, value_range=value_range
        )
        for name in sorted(spectra)
    ]
    if pooled and spectra:
        merged = np.concatenate([spectra[name] for name in sorted(spectra)])
        reports.append(
            build_layer_report(
                POOLED_LAYER_NAME, (), merged, bins=bins, value_range=value_range
            )
        )
    return reports


def compare_checkpoints(
    before: Checkpoint,
    after: Checkpoint,
    layer_filter: Sequence[str] = ("*",),
    bins: int = DEFAULT_HISTOGRAM_BINS,
    value_range=DEFAULT_HISTOGRAM_RANGE,
    workers: Optional[int] = None,
) -> list:
    """Before/after reports for matrix-like layers present in both checkpoints."""
    patterns = validate_patterns(layer_filter)
    names = []
    for name in _selected_matrices(before, patterns):
        other = after.tensors.get(name)
        if other is None:
            logger.warning("Layer %s missing from the second checkpoint, skipped", name)
            continue
        if other.shape != before.tensors[name].shape:
            raise ShapeMismatchError(
                "shape mismatch between checkpoints",
                layer=name,
                before=before.tensors[name].shape,
                after=other.shape,
            )
        names.append(name)

    def pair_spectra(name):
        return tensor_spectrum(before.tensors[name]), tensor_spectrum(after.tensors[name])

    spectra = map_layers(pair_spectra, names, workers)
    reports = []
    for name in sorted(spectra):
        sigma_before, sigma_after = spectra[name]
        warnings = []
        if before.tensors[name].dtype != after.tensors[name].dtype:
            warnings.append(
                f"dtype changed {before.tensors[name].dtype.value} -> "
                f"{after.tensors[name].dtype.value}"
            )
        reports.append(
            build_layer_report(
                name,
                before.tensors[name].shape,
                sigma_before,
                sigma_after,
                warnings,
                bins,
                value_range,
            )
        )
    return reports


def _number(value: float):
    return "inf" if math.isinf(value) else float(value)


def _stats_dict(stats: Optional[SpectrumStats]):
    if stats is None:
        return None
    return {
        "sigma_max": float(stats.sigma_max),
        "sigma_min": float(stats.sigma_min),
        "condition": _number(stats.condition),
        "log10_gap": _number(stats.log10_gap),
        "stable_rank": float(stats.stable_rank),
        "count": stats.count,
    }


def _histogram_dict(hist: Optional[Histogram]):
    if hist is None:
        return None
    return {
        "lo": hist.lo,
        "hi": hist.hi,
        "bins": hist.bins,
        "counts": list(hist.counts),
        "underflow": hist.underflow,
        "overflow": hist.overflow,
        "total": hist.total,
    }


def report_to_dict(report: LayerReport) -> dict:
    return {
        "layer_name": report.layer_name,
        "shape": list(report.shape),
        "before": _stats_dict(report.before),
        "after": _stats_dict(report.after),
        "histogram_before": _histogram_dict(report.histogram_before),
        "histogram_after": _histogram_dict(report.histogram_after),
        "warnings": list(report.warnings),
    }


def _csv_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def _csv_rows(report: LayerReport):
    phases = [("before", report.histogram_before), ("after", report.histogram_after)]
    for phase, hist in phases:
        if hist is None:
            continue
        edges = hist.edges()
        yield [report.layer_name, "bin", phase, "underflow", None, hist.lo, hist.underflow]
        for i, count in enumerate(hist.counts):
            yield [report.layer_name, "bin", phase, i, edges[i], edges[i + 1], count]
        yield [report.layer_name, "bin", phase, "overflow", hist.hi, None, hist.overflow]

    after = report.after
    yield [
        report.layer_name,
        "summary",
        None,
        None,
        None,
        None,
        None,
        report.before.count,
        report.before.sigma_max,
        report.before.sigma_min,
        report.before.condition,
        after.sigma_max if after else None,
        after.sigma_min if after else None,
        after.condition if after else None,
    ]


def export_report(
    reports: Sequence[LayerReport], fmt: ReportFormat = ReportFormat.JSON
) -> bytes:
    """Serialize reports deterministically as JSON or CSV bytes."""
    fmt = ReportFormat(fmt)
    if fmt is ReportFormat.JSON:
        text = json.dumps([report_to_dict(r) for r in reports], indent=2) + "\n"
        return text.encode("utf-8")

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in reports:
        for row in _csv_rows(report):
            row = row + [None] * (len(CSV_COLUMNS) - len(row))
            writer.writerow([_csv_text(v) for v in row])
    return buffer.getvalue().encode("utf-8")
