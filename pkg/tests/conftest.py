import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to path so tests can import from svs_refine package
ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def spectrum_matrix():
    """Factory for dense m x n matrices with a prescribed spectrum."""

    def build(rng, sigma, m=None, n=None):
        sigma = np.asarray(sigma, dtype=np.float64)
        m = m or len(sigma)
        n = n or len(sigma)
        u, _ = np.linalg.qr(rng.standard_normal((m, m)))
        v, _ = np.linalg.qr(rng.standard_normal((n, n)))
        return (u[:, : len(sigma)] * sigma) @ v[:, : len(sigma)].T

    return build
