#!/usr/bin/env python3
"""
Constants for svs-refine

Centralized numerical tolerances, report defaults, exit codes and runtime
overrides.
"""

import logging
import os
import tempfile
from pathlib import Path

logger = logging.getLogger(__name__)

PACKAGE_ROOT = Path(__file__).resolve().parent

PACKAGED_BENCH_CONFIG_PATH = PACKAGE_ROOT / "benchmark" / "config.yaml"


def worker_count() -> int:
    """Return the worker bound from SVS_THREADS, else the machine core count."""
    raw = os.environ.get("SVS_THREADS")
    if raw:
        try:
            value = int(raw)
        except ValueError:
            value = 0
        if value >= 1:
            return value
        logger.warning("Ignoring invalid SVS_THREADS=%r, using core count", raw)
    return os.cpu_count() or 1


def atomic_write_bytes(data: bytes, path: Path) -> None:
    """Write *data* to *path* atomically via temp-file + rename.

    Readers never observe a truncated checkpoint or report. The temp file is
    created in the destination directory so the rename stays on one filesystem.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


# SVD
SVD_CONVERGENCE_TOL = 1e-14  # relative off-diagonal driving term
SVD_MAX_SWEEPS = 60
DEFAULT_SIGMA_ZERO_TOL = 1e-12  # relative to sigma_1
ORDER_CHECK_RTOL = 1e-12  # gaps below this are rounding, not order

# Spectrum reports
DEFAULT_HISTOGRAM_BINS = 64
DEFAULT_HISTOGRAM_RANGE = (-6.0, 3.0)  # log10 space
POOLED_LAYER_NAME = "<pooled>"

# Checkpoint conventions
WEIGHT_SUFFIX = ".weight"
BIAS_SUFFIX = ".bias"
METADATA_KEY = "__metadata__"
HEADER_ALIGNMENT = 8

# Toy benchmark
LEAKY_RELU_SLOPE = 0.2
DEFAULT_TOY_DIMS = (16, 64, 64, 16)
LOSS_RECORD_INTERVAL = 10
THRESHOLD_FACTOR = 1.05
SMOOTHING_WINDOW = 10
SPARSITY_SWEEP = (0.3, 0.5, 0.7)

# CLI exit codes (sysexits.h where one applies)
EXIT_OK = 0
EXIT_SHAPE_MISMATCH = 2
EXIT_USAGE = 64
EXIT_SOFTWARE = 70
EXIT_IOERR = 74

# Logging
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_LOG_LEVEL = "WARNING"
