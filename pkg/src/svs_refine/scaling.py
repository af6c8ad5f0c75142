"""
Singular value scaling of weights and their paired biases.

A weight W = U diag(sigma) V^T is replaced by U diag(f(sigma)) V^T with U and
V untouched. The bias rule maps the bias norm through the same f while keeping
its direction: b -> (f(|b|) / |b|) * b, which for the square root is
b / sqrt(|b|).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .constants import DEFAULT_SIGMA_ZERO_TOL, ORDER_CHECK_RTOL
from .exceptions import ScalerDomainError
from .svd_core import SvdFactors, reconstruct, svd
from .tensor_store import Matrix
from .validation import ValidationError, validate_vector

logger = logging.getLogger(__name__)


class ScalerKind(str, Enum):
    """Singular-value scaling functions; values double as CLI names."""

    SQRT = "sqrt"
    LOG1P = "log1p"
    ABSLOG = "abslog"
    SQUARE = "square"
    NORMALIZE = "normalize"
    SPECTRAL_NORMALIZE = "specnorm"
    IDENTITY = "identity"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def preserves_order(self) -> bool:
        """Whether f is non-decreasing on [0, inf), so sorted spectra stay sorted."""
        return self is not ScalerKind.ABSLOG


_LABELS = {
    ScalerKind.SQRT: "sqrt(x)",
    ScalerKind.LOG1P: "log(x+1)",
    ScalerKind.ABSLOG: "|log(x)|",
    ScalerKind.SQUARE: "squaring singular values",
    ScalerKind.NORMALIZE: "normalizing singular values",
    ScalerKind.SPECTRAL_NORMALIZE: "spectral normalizing singular values",
    ScalerKind.IDENTITY: "identity",
}


@dataclass(frozen=True)
class ScaledPair:
    """Refined weight and bias of one layer with the spectra they came from."""

    weight: Matrix
    bias: Optional[np.ndarray]
    sigma_before: np.ndarray
    sigma_after: np.ndarray
    warnings: tuple = field(default_factory=tuple)


def apply_scaler(
    sigma, kind: ScalerKind, tol: float = DEFAULT_SIGMA_ZERO_TOL
) -> np.ndarray:
    """Apply f elementwise; positions are kept so U/V pairing survives.

    Entries at or below ``tol * max(sigma)`` are treated as exact zeros: they
    are rounding residue of a rank-deficient matrix, so AbsLog rejects them and
    the power and log scalers map them to 0 instead of inflating the noise.
    """
    kind = ScalerKind(kind)
    sigma = validate_vector(sigma, "sigma")
    if np.any(sigma < 0):
        raise ValidationError("Singular values must be non-negative")
    if tol < 0:
        raise ValidationError(f"Tolerance must be >= 0. Got: {tol}")

    top = sigma.max() if sigma.size else 0.0
    null = sigma <= tol * top

    if kind is ScalerKind.SQRT:
        return np.where(null, 0.0, np.sqrt(sigma))
    if kind is ScalerKind.LOG1P:
        return np.where(null, 0.0, np.log1p(sigma))
    if kind is ScalerKind.ABSLOG:
        if np.any(null):
            raise ScalerDomainError("AbsLog undefined at zero")
        return np.abs(np.log(sigma))
    if kind is ScalerKind.SQUARE:
        return np.where(null, 0.0, sigma * sigma)
    if kind is ScalerKind.NORMALIZE:
        # zeros below the rank tolerance stay zero so pruned rank is not revived
        return np.where(null, 0.0, 1.0)
    if kind is ScalerKind.SPECTRAL_NORMALIZE:
        if top <= 0:
            raise ScalerDomainError("zero spectral norm")
        return sigma / top
    return sigma.copy()


def order_warnings(
    before, after, rtol: float = ORDER_CHECK_RTOL, check_collapse: bool = True
) -> list:
    """Describe adjacent pairs whose relative order the scaler did not keep.

    Reports reversals (after increases where before did not) and collapses
    (distinct inputs mapped to equal outputs). Gaps no larger than *rtol*
    times the largest value of their spectrum count as ties. Scalers that
    flatten the spectrum by definition pass ``check_collapse=False``.
    """
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if before.size < 2:
        return []
    in_gap = rtol * float(np.max(np.abs(before)))
    out_gap = rtol * float(np.max(np.abs(after)))
    messages = []
    for i in range(len(before) - 1):
        if before[i] < before[i + 1]:
            continue
        if after[i + 1] - after[i] > out_gap:
            messages.append(
                f"order reversed at index {i}: {before[i]:.6g} >= {before[i + 1]:.6g} "
                f"but scaled {after[i]:.6g} < {after[i + 1]:.6g}"
            )
        elif (
            check_collapse
            and before[i] - before[i + 1] > in_gap
            and after[i] == after[i + 1]
        ):
            messages.append(
                f"order collapsed at index {i}: {before[i]:.6g} > {before[i + 1]:.6g} "
                f"both scale to {after[i]:.6g}"
            )
    return messages


def scale_factors(
    f: SvdFactors, kind: ScalerKind, tol: float = DEFAULT_SIGMA_ZERO_TOL
) -> SvdFactors:
    return f.with_sigma(apply_scaler(f.sigma, kind, tol))


def scale_weight(
    w: Matrix, kind: ScalerKind, tol: float = DEFAULT_SIGMA_ZERO_TOL
) -> Matrix:
    """Return U diag(f(sigma)) V^T for the SVD of *w*."""
    return reconstruct(scale_factors(svd(w), kind, tol))


def scale_bias(b, kind: ScalerKind) -> np.ndarray:
    """Rescale *b* so that its Euclidean norm becomes f(|b|)."""
    kind = ScalerKind(kind)
    b = validate_vector(b, "bias")
    norm = float(np.linalg.norm(b))
    if norm == 0:
        return b.copy()
    if kind is ScalerKind.SQRT:
        return b / np.sqrt(norm)
    scaled_norm = float(apply_scaler(np.array([norm]), kind)[0])
    return (scaled_norm / norm) * b


def verify_ratio_identity(b, sigma) -> list:
    """Residuals of |b_scaled| / sqrt(sigma_i) against sqrt(|b| / sigma_i).

    Both sides are equal in exact arithmetic under the square-root scaler, so
    every residual should sit at rounding level.
    """
    b = validate_vector(b, "bias")
    sigma = validate_vector(sigma, "sigma")
    if sigma.size == 0 or np.any(sigma <= 0):
        raise ValidationError("Ratio identity needs strictly positive singular values")
    norm = float(np.linalg.norm(b))
    if norm <= 0:
        raise ValidationError("Ratio identity needs a non-zero bias")

    scaled_norm = float(np.linalg.norm(scale_bias(b, ScalerKind.SQRT)))
    scaled_sigma = apply_scaler(sigma, ScalerKind.SQRT, tol=0.0)
    return [
        abs(scaled_norm / s_scaled - np.sqrt(norm / s))
        for s, s_scaled in zip(sigma.tolist(), scaled_sigma.tolist())
    ]


def scale_pair(
    w: Matrix,
    b=None,
    kind: ScalerKind = ScalerKind.SQRT,
    include_bias: bool = True,
    tol: float = DEFAULT_SIGMA_ZERO_TOL,
) -> ScaledPair:
    """Scale one layer's weight (and optionally bias), keeping both spectra."""
    kind = ScalerKind(kind)
    w = np.asarray(w, dtype=np.float64)
    factors = svd(w)
    scaled = scale_factors(factors, kind, tol)
    # identity returns the stored weight untouched instead of a re-multiplied copy
    weight = w.copy() if kind is ScalerKind.IDENTITY else reconstruct(scaled)

    warnings = order_warnings(
        factors.sigma, scaled.sigma, check_collapse=kind is not ScalerKind.NORMALIZE
    )
    logger.debug(
        "Scaled %dx%d weight with %s (%d order warnings)",
        w.shape[0],
        w.shape[1],
        kind.value,
        len(warnings),
    )

    bias = None
    if b is not None:
        bias = scale_bias(b, kind) if include_bias else np.asarray(b, dtype=np.float64)
    return ScaledPair(
        weight=weight,
        bias=bias,
        sigma_before=factors.sigma,
        sigma_after=scaled.sigma,
        warnings=tuple(warnings),
    )
