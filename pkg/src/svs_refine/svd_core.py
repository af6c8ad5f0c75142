"""
Thin SVD, reconstruction and Moore-Penrose pseudoinverse for dense matrices.

The decomposition is a one-sided (Hestenes) Jacobi SVD. The shorter side is
orthogonalized by plane rotations applied to rows, which implicitly
diagonalizes W W^T; wide matrices are first reduced with a QR factorization
of W^T so rotations act on an r x r factor. Rows are paired in round-robin
order, so every round is a set of disjoint rotations applied in one
vectorized step. Jacobi keeps high relative accuracy on small singular
values, which is where scaling functions act most strongly.

Tall matrices (m > n) are handled by factoring the transpose and swapping
U and V.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constants import DEFAULT_SIGMA_ZERO_TOL, SVD_CONVERGENCE_TOL, SVD_MAX_SWEEPS
from .exceptions import (
    DimensionMismatchError,
    NonFiniteMatrixError,
    RankDeficientError,
    SvdConvergenceError,
)
from .tensor_store import Matrix
from .validation import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD factors: u (m x r), sigma (r,), vt (r x n) with r = min(m, n)."""

    u: Matrix
    sigma: np.ndarray
    vt: Matrix

    @property
    def shape(self) -> tuple:
        return self.u.shape[0], self.vt.shape[1]

    @property
    def rank_bound(self) -> int:
        return self.sigma.shape[0]

    def with_sigma(self, sigma) -> "SvdFactors":
        """Return factors sharing u and vt with a replaced spectrum."""
        return SvdFactors(u=self.u, sigma=np.asarray(sigma, dtype=np.float64), vt=self.vt)


@lru_cache(maxsize=64)
def _round_robin(n: int) -> tuple:
    """Round-robin schedule over n indices: n-1 (or n) rounds of disjoint pairs."""
    players = list(range(n + (n % 2)))
    count = len(players)
    rounds = []
    for _ in range(count - 1):
        p, q = [], []
        for i in range(count // 2):
            a, b = players[i], players[count - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        if p:
            rounds.append((np.array(p), np.array(q)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _jacobi_rows(a: np.ndarray, tol: float, max_sweeps: int) -> tuple:
    """Orthogonalize the rows of *a*; return (a, u, sweeps).

    On return ``u @ a`` equals the input and the rows of ``a`` are mutually
    orthogonal to relative tolerance *tol*, floored at the rounding level of
    a dot product of row length. U^T is carried as extra columns of the
    working array so each rotation updates both in one step. Squared row
    norms are updated in closed form within a sweep and recomputed at the
    start of the next.
    """
    r, n = a.shape
    tol = max(tol, n * np.finfo(np.float64).eps)
    work = np.hstack([a, np.eye(r)])
    schedule = _round_robin(r)
    for sweep in range(1, max_sweeps + 1):
        norms = np.einsum("ij,ij->i", work[:, :n], work[:, :n])
        rotated = False
        for p, q in schedule:
            wp, wq = work[p], work[q]
            gamma = np.einsum("ij,ij->i", wp[:, :n], wq[:, :n])
            alpha, beta = norms[p], norms[q]
            active = np.abs(gamma) > tol * np.sqrt(alpha) * np.sqrt(beta)
            if not active.any():
                continue
            rotated = True
            safe_gamma = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * safe_gamma)
            t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t

            cc, sc = c[:, None], s[:, None]
            work[p], work[q] = cc * wp - sc * wq, sc * wp + cc * wq
            norms[p] = np.maximum(alpha - t * gamma, 0.0)
            norms[q] = np.maximum(beta + t * gamma, 0.0)
        if not rotated:
            return work[:, :n].copy(), work[:, n:].T.copy(), sweep
    raise SvdConvergenceError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")


def _complete_rows(vt: np.ndarray, missing: np.ndarray) -> None:
    """Replace rows listed in *missing* with an orthonormal completion."""
    n = vt.shape[1]
    keep = np.ones(vt.shape[0], dtype=bool)
    keep[missing] = False
    basis = [vt[i] for i in np.flatnonzero(keep)]
    candidate = 0
    for row in missing:
        while candidate < n:
            e = np.zeros(n)
            e[candidate] = 1.0
            candidate += 1
            for _ in range(2):
                for b in basis:
                    e -= (b @ e) * b
            norm = np.linalg.norm(e)
            if norm > 0.5:
                vt[row] = e / norm
                basis.append(vt[row])
                break


def _svd_wide(w: np.ndarray, tol: float, max_sweeps: int) -> tuple:
    """Thin SVD of an m x n matrix with m <= n."""
    m, n = w.shape
    if m < n:
        q, rt = np.linalg.qr(w.T)  # w = rt.T @ q.T
        a, u, sweeps = _jacobi_rows(rt.T.copy(), tol, max_sweeps)
        rows = a @ q.T
    else:
        a, u, sweeps = _jacobi_rows(w.copy(), tol, max_sweeps)
        rows = a
    logger.debug("Jacobi SVD of %dx%d converged after %d sweeps", m, n, sweeps)

    sigma = np.linalg.norm(a, axis=1)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    u = u[:, order]
    rows = rows[order]

    vt = np.zeros_like(rows)
    nonzero = sigma > 0
    vt[nonzero] = rows[nonzero] / sigma[nonzero, None]
    if not nonzero.all():
        _complete_rows(vt, np.flatnonzero(~nonzero))
    return u, sigma, vt


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> None:
    """Make each left singular vector's largest-magnitude entry non-negative."""
    pivots = np.argmax(np.abs(u), axis=0)
    flip = u[pivots, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    vt[flip] *= -1.0


def svd(
    w: Matrix, tol: float = SVD_CONVERGENCE_TOL, max_sweeps: int = SVD_MAX_SWEEPS
) -> SvdFactors:
    """Deterministic thin SVD of a finite dense matrix."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or 0 in w.shape:
        raise ValidationError(f"Expected a non-empty matrix. Got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise NonFiniteMatrixError("non-finite matrix")

    m, n = w.shape
    if m <= n:
        u, sigma, vt = _svd_wide(w, tol, max_sweeps)
    else:
        v, sigma, ut = _svd_wide(w.T, tol, max_sweeps)
        u, vt = ut.T.copy(), v.T.copy()
    _fix_signs(u, vt)
    return SvdFactors(u=u, sigma=sigma, vt=vt)


def singular_values(w: Matrix) -> np.ndarray:
    return svd(w).sigma


def _check_factors(f: SvdFactors) -> None:
    r = f.sigma.shape[0] if f.sigma.ndim == 1 else -1
    if (
        r < 1
        or f.u.ndim != 2
        or f.vt.ndim != 2
        or f.u.shape[1] != r
        or f.vt.shape[0] != r
    ):
        raise DimensionMismatchError(
            f"Incompatible factors: u {f.u.shape}, sigma {f.sigma.shape}, vt {f.vt.shape}"
        )


def reconstruct(f: SvdFactors) -> Matrix:
    """Return u @ diag(sigma) @ vt."""
    _check_factors(f)
    return (f.u * f.sigma) @ f.vt


def pseudoinverse(f: SvdFactors, tol: float = DEFAULT_SIGMA_ZERO_TOL) -> Matrix:
    """Moore-Penrose inverse V diag(sigma+) U^T.

    sigma+_i is 1/sigma_i when sigma_i > tol * sigma_1 and 0 otherwise.
    """
    if tol < 0:
        raise ValidationError(f"Tolerance must be >= 0. Got: {tol}")
    _check_factors(f)
    cutoff = tol * f.sigma[0]
    keep = f.sigma > cutoff
    inv = np.divide(1.0, f.sigma, out=np.zeros_like(f.sigma), where=keep)
    return (f.vt.T * inv) @ f.u.T


def condition_number(f: SvdFactors) -> float:
    """sigma_max / sigma_min; raises RankDeficientError when sigma_min is 0."""
    _check_factors(f)
    smallest = f.sigma[-1]
    if smallest <= 0:
        raise RankDeficientError("rank-deficient: condition number infinite")
    return float(f.sigma[0] / smallest)
