#!/usr/bin/env python3
"""
Input validation utilities for svs-refine

Precondition checks shared by the numerical modules, the pipeline and the
CLI. Every check raises ValidationError with the offending value in the message.
"""

import fnmatch
import math
import re
from typing import Iterable, Sequence

import numpy as np


class ValidationError(ValueError):
    """Custom exception for validation errors with detailed context"""

    pass


def validate_patterns(patterns: Iterable[str]) -> tuple:
    """
    Validate a list of glob patterns over tensor names.

    Args:
        patterns: Glob patterns (fnmatch syntax)

    Returns:
        Tuple of validated patterns

    Raises:
        ValidationError: If a pattern is empty or does not compile

    Examples:
        >>> validate_patterns(["*.weight", "mapping.*"])
        ('*.weight', 'mapping.*')
    """
    if isinstance(patterns, str):
        raise ValidationError(f"Patterns must be a list of strings. Got: {patterns!r}")

    validated = []
    for pattern in patterns:
        if not pattern or not isinstance(pattern, str):
            raise ValidationError(
                f"Pattern must be a non-empty string. Got: {pattern!r}"
            )
        try:
            re.compile(fnmatch.translate(pattern))
        except re.error as e:
            raise ValidationError(f"Invalid glob pattern {pattern!r}: {e}") from e
        validated.append(pattern)
    return tuple(validated)


def matches_any(name: str, patterns: Sequence[str]) -> bool:
    """Return True when *name* matches at least one glob pattern."""
    return any(fnmatch.fnmatchcase(name, pattern) for pattern in patterns)


def validate_bins(bins: int) -> int:
    """
    Validate a histogram bin count.

    Examples:
        >>> validate_bins(64)
        64
    """
    if isinstance(bins, bool) or not isinstance(bins, (int, np.integer)):
        raise ValidationError(f"Bin count must be an integer. Got: {bins!r}")
    if bins < 1:
        raise ValidationError(f"Bin count must be >= 1. Got: {bins}")
    return int(bins)


def validate_log_range(lo: float, hi: float) -> tuple:
    """
    Validate a [lo, hi] histogram range in log10 space.

    Examples:
        >>> validate_log_range(-6, 3)
        (-6.0, 3.0)
    """
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError(f"Histogram range must be finite. Got: [{lo}, {hi}]")
    if lo >= hi:
        raise ValidationError(f"Histogram range needs lo < hi. Got: [{lo}, {hi}]")
    return lo, hi


def validate_sparsity(sparsity: float, allow_zero: bool = False) -> float:
    """
    Validate a channel sparsity fraction.

    Args:
        sparsity: Fraction of hidden channels to remove
        allow_zero: Accept 0 (no pruning)

    Examples:
        >>> validate_sparsity(0.5)
        0.5
    """
    sparsity = float(sparsity)
    lower_ok = sparsity >= 0 if allow_zero else sparsity > 0
    if not (lower_ok and sparsity < 1):
        bound = "[0, 1)" if allow_zero else "(0, 1)"
        raise ValidationError(f"Sparsity must lie in {bound}. Got: {sparsity}")
    return sparsity


def validate_dims(dims: Sequence[int]) -> tuple:
    """
    Validate toy network layer widths.

    Examples:
        >>> validate_dims([16, 64, 64, 16])
        (16, 64, 64, 16)
    """
    dims = tuple(dims)
    if len(dims) < 2:
        raise ValidationError(f"Need at least input and output widths. Got: {dims}")
    for d in dims:
        if isinstance(d, bool) or not isinstance(d, (int, np.integer)) or d < 1:
            raise ValidationError(f"Layer widths must be positive integers. Got: {dims}")
    return tuple(int(d) for d in dims)


def validate_vector(values, name: str = "vector") -> np.ndarray:
    """Return *values* as a finite 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional. Got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must have finite entries")
    return arr


if __name__ == "__main__":
    import doctest

    doctest.testmod()
