#!/usr/bin/env python3
"""
Tests for spectrum statistics, histograms and report export
"""

import csv
import io
import json
import math

import numpy as np
import pytest

from svs_refine.constants import POOLED_LAYER_NAME
from svs_refine.exceptions import ShapeMismatchError
from svs_refine.spectrum_report import (
    CSV_COLUMNS,
    ReportFormat,
    build_layer_report,
    compare_checkpoints,
    compute_stats,
    export_report,
    histogram,
    inspect_checkpoint,
    map_layers,
)
from svs_refine.tensor_store import Checkpoint, Tensor
from svs_refine.validation import ValidationError


def _ckpt(**arrays):
    return Checkpoint.from_tensors(
        [Tensor.from_array(name.replace("__", "."), value) for name, value in arrays.items()]
    )


class TestStats:
    """Summary statistics of a sorted spectrum"""

    def test_basic_stats(self):
        stats = compute_stats([4.0, 2.0, 1.0])
        assert stats.sigma_max == 4.0
        assert stats.sigma_min == 1.0
        assert stats.condition == 4.0
        assert stats.log10_gap == pytest.approx(math.log10(4.0))
        assert stats.stable_rank == pytest.approx(21.0 / 16.0)
        assert stats.count == 3
        assert not stats.condition_infinite

    def test_zero_smallest_value(self):
        stats = compute_stats([3.0, 0.0])
        assert stats.condition_infinite
        assert math.isinf(stats.log10_gap)

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            compute_stats([])
        with pytest.raises(ValidationError):
            compute_stats([1.0, 2.0])
        with pytest.raises(ValidationError):
            compute_stats([1.0, -1.0])


class TestHistogram:
    """log10 binning with out-of-range buckets"""

    def test_bins_and_buckets(self):
        hist = histogram([1.0, 10.0, 100.0, 0.0, 1e-7, 1e4], bins=9, value_range=(-6, 3))
        assert hist.counts[6] == hist.counts[7] == hist.counts[8] == 1
        assert sum(hist.counts) == 3
        assert hist.underflow == 2
        assert hist.overflow == 1
        assert hist.total == 6

    def test_upper_edge_goes_to_last_bin(self):
        hist = histogram([1000.0], bins=9, value_range=(-6, 3))
        assert hist.counts[-1] == 1
        assert hist.overflow == 0

    def test_default_shape(self):
        hist = histogram([1.0])
        assert hist.bins == 64
        assert (hist.lo, hist.hi) == (-6.0, 3.0)
        assert len(hist.edges()) == 65

    def test_invalid_arguments(self):
        with pytest.raises(ValidationError):
            histogram([1.0], bins=0)
        with pytest.raises(ValidationError):
            histogram([1.0], value_range=(2, 1))
        with pytest.raises(ValidationError):
            histogram([-1.0])


class TestReports:
    """Single and paired checkpoint reports"""

    def test_inspect_selects_matrices_only(self):
        ckpt = _ckpt(a__weight=np.diag([4.0, 1.0]), a__bias=np.ones(2), b__weight=np.eye(3))
        reports = inspect_checkpoint(ckpt)
        assert [r.layer_name for r in reports] == ["a.weight", "b.weight"]
        assert reports[0].before.condition == pytest.approx(4.0)
        assert reports[0].after is None
        assert reports[0].histogram_after is None

    def test_inspect_filter_and_pooled(self):
        ckpt = _ckpt(a__weight=np.diag([4.0, 1.0]), b__weight=np.eye(3), c__weight=np.eye(2))
        reports = inspect_checkpoint(ckpt, layer_filter=["a.*", "b.*"], pooled=True)
        assert [r.layer_name for r in reports] == ["a.weight", "b.weight", POOLED_LAYER_NAME]
        pooled = reports[-1]
        assert pooled.before.count == 5
        assert pooled.before.sigma_max == pytest.approx(4.0)
        assert pooled.shape == ()

    def test_compare_reports_both_phases(self):
        before = _ckpt(a__weight=np.diag([4.0, 1.0]))
        after = _ckpt(a__weight=np.diag([2.0, 1.0]))
        (report,) = compare_checkpoints(before, after)
        assert report.before.condition == pytest.approx(4.0)
        assert report.after.condition == pytest.approx(2.0)
        assert report.histogram_after.total == 2

    def test_compare_with_itself(self, rng):
        ckpt = _ckpt(a__weight=rng.standard_normal((4, 6)), b__weight=np.diag([4.0, 1.0]))
        for report in compare_checkpoints(ckpt, ckpt):
            assert report.after == report.before
            assert report.histogram_after == report.histogram_before

    def test_compare_shape_mismatch(self):
        before = _ckpt(a__weight=np.eye(2))
        after = _ckpt(a__weight=np.eye(3))
        with pytest.raises(ShapeMismatchError):
            compare_checkpoints(before, after)

    def test_compare_skips_missing_layers(self):
        before = _ckpt(a__weight=np.eye(2), b__weight=np.eye(2))
        after = _ckpt(a__weight=np.eye(2))
        assert [r.layer_name for r in compare_checkpoints(before, after)] == ["a.weight"]

    def test_unsorted_spectrum_is_sorted_for_stats(self):
        report = build_layer_report("x", (2, 2), [1.0, 3.0], [0.5, 2.0])
        assert report.before.sigma_max == 3.0
        assert report.after.sigma_min == 0.5

    def test_map_layers_is_name_ordered(self):
        result = map_layers(str.upper, ["b", "a", "c"], workers=3)
        assert list(result) == ["a", "b", "c"]
        assert result["b"] == "B"


class TestExport:
    """JSON and CSV serialization"""

    def _reports(self):
        return [
            build_layer_report("a.weight", (2, 2), [4.0, 0.0], [2.0, 0.0], ["note"], bins=4),
            build_layer_report("b.weight", (3, 2), [1.0, 1.0], bins=4),
        ]

    def test_json_layout(self):
        data = json.loads(export_report(self._reports(), ReportFormat.JSON))
        assert list(data[0]) == [
            "layer_name",
            "shape",
            "before",
            "after",
            "histogram_before",
            "histogram_after",
            "warnings",
        ]
        assert data[0]["before"]["condition"] == "inf"
        assert data[0]["warnings"] == ["note"]
        assert data[1]["after"] is None
        assert data[1]["histogram_before"]["counts"] == [0, 0, 2, 0]

    def test_json_floats_reparse_exactly(self, rng):
        sigma = np.sort(rng.uniform(0.01, 10.0, size=7))[::-1]
        report = build_layer_report("w.weight", (7, 9), sigma, np.sqrt(sigma))
        (data,) = json.loads(export_report([report]))
        for phase, stats in (("before", report.before), ("after", report.after)):
            assert data[phase]["sigma_max"] == stats.sigma_max
            assert data[phase]["sigma_min"] == stats.sigma_min
            assert data[phase]["condition"] == stats.condition
            assert data[phase]["log10_gap"] == stats.log10_gap
            assert data[phase]["stable_rank"] == stats.stable_rank

    def test_json_is_deterministic(self):
        assert export_report(self._reports()) == export_report(self._reports())

    def test_csv_rows(self):
        text = export_report(self._reports(), ReportFormat.CSV).decode("utf-8")
        rows = list(csv.reader(io.StringIO(text)))
        assert tuple(rows[0]) == CSV_COLUMNS
        body = rows[1:]
        # a.weight: two phases of (4 bins + 2 buckets) plus summary; b.weight: 6 + 1
        assert len(body) == 12 + 1 + 6 + 1
        summaries = [r for r in body if r[1] == "summary"]
        assert [r[0] for r in summaries] == ["a.weight", "b.weight"]
        assert summaries[0][CSV_COLUMNS.index("before_condition")] == "inf"
        assert summaries[1][CSV_COLUMNS.index("after_condition")] == ""
        assert all(len(r) == len(CSV_COLUMNS) for r in body)

    def test_format_from_suffix(self):
        assert ReportFormat.for_path("r.CSV") is ReportFormat.CSV
        assert ReportFormat.for_path("r.json") is ReportFormat.JSON
        assert ReportFormat.for_path("report") is ReportFormat.JSON
