#!/usr/bin/env python3
"""
Test constants module
"""

from svs_refine.constants import (
    DEFAULT_HISTOGRAM_BINS,
    DEFAULT_HISTOGRAM_RANGE,
    EXIT_IOERR,
    EXIT_SHAPE_MISMATCH,
    EXIT_SOFTWARE,
    EXIT_USAGE,
    PACKAGED_BENCH_CONFIG_PATH,
    SVD_CONVERGENCE_TOL,
    SVD_MAX_SWEEPS,
    atomic_write_bytes,
    worker_count,
)


def test_constants_defined():
    """Test that constants are properly defined"""
    assert 0 < SVD_CONVERGENCE_TOL < 1e-10
    assert SVD_MAX_SWEEPS == 60
    assert DEFAULT_HISTOGRAM_BINS == 64
    assert DEFAULT_HISTOGRAM_RANGE == (-6.0, 3.0)
    assert PACKAGED_BENCH_CONFIG_PATH.name == "config.yaml"
    assert PACKAGED_BENCH_CONFIG_PATH.exists()


def test_exit_codes_are_distinct():
    codes = [EXIT_SHAPE_MISMATCH, EXIT_USAGE, EXIT_SOFTWARE, EXIT_IOERR]
    assert len(set(codes)) == len(codes)
    assert (EXIT_USAGE, EXIT_SOFTWARE, EXIT_IOERR) == (64, 70, 74)


def test_worker_count_override(monkeypatch):
    monkeypatch.setenv("SVS_THREADS", "3")
    assert worker_count() == 3


def test_worker_count_ignores_invalid_override(monkeypatch):
    monkeypatch.delenv("SVS_THREADS", raising=False)
    default = worker_count()
    assert default >= 1
    for raw in ("zero", "0", "-2"):
        monkeypatch.setenv("SVS_THREADS", raw)
        assert worker_count() == default


def test_atomic_write_replaces_file(tmp_path):
    target = tmp_path / "sub" / "out.bin"
    atomic_write_bytes(b"first", target)
    atomic_write_bytes(b"second", target)
    assert target.read_bytes() == b"second"
    assert [p.name for p in target.parent.iterdir()] == ["out.bin"]
