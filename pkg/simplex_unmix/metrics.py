"""
Recovery metrics.

Both MSE and SAD are minimized over column permutations of the estimate.
The objectives separate column by column, so an optimal linear assignment
on the pairwise cost matrix gives the exact minimum.
"""

import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ShapeError, ZeroNormError
from .models import MatchResult


def _check_shapes(A0: np.ndarray, A_hat: np.ndarray):
    if A0.shape != A_hat.shape:
        raise ShapeError(f"shape mismatch: {A0.shape} vs {A_hat.shape}")


def _assign(cost: np.ndarray):
    rows, cols = linear_sum_assignment(cost)
    # rows come back as 0..N-1 in order
    return cols, cost[rows, cols]


def mse(A0: np.ndarray, A_hat: np.ndarray) -> MatchResult:
    """min over permutations P of ||A0 - A_hat P||_F^2 / (M N)."""
    A0 = np.asarray(A0, dtype=float)
    A_hat = np.asarray(A_hat, dtype=float)
    _check_shapes(A0, A_hat)
    m, n = A0.shape
    diff = A0[:, :, np.newaxis] - A_hat[:, np.newaxis, :]
    cost = np.einsum('mij,mij->ij', diff, diff)
    perm, per_column = _assign(cost)
    return MatchResult(score=float(per_column.sum()) / (m * n),
                       permutation=[int(j) for j in perm],
                       per_column=per_column)


def sad(A0: np.ndarray, A_hat: np.ndarray) -> MatchResult:
    """Spectral angle distance in radians, averaged over matched columns."""
    A0 = np.asarray(A0, dtype=float)
    A_hat = np.asarray(A_hat, dtype=float)
    _check_shapes(A0, A_hat)
    norms0 = np.linalg.norm(A0, axis=0)
    norms_hat = np.linalg.norm(A_hat, axis=0)
    for name, norms in (('A0', norms0), ('A_hat', norms_hat)):
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ShapeError(f"{name} column {int(zero[0])} is zero; spectral angle undefined")
    cosines = (A0.T @ A_hat) / np.outer(norms0, norms_hat)
    cost = np.arccos(np.clip(cosines, -1.0, 1.0))
    perm, per_column = _assign(cost)
    return MatchResult(score=float(per_column.mean()),
                       permutation=[int(j) for j in perm],
                       per_column=per_column)


def snr_db(X: np.ndarray, sigma2: float) -> float:
    """10 log10( (1/T) sum ||x_t||^2 / (M sigma2) ); +inf for sigma2 = 0."""
    X = np.asarray(X, dtype=float)
    if sigma2 <= 0:
        return math.inf
    m = X.shape[0]
    power = float(np.mean(np.sum(X * X, axis=0)))
    return 10.0 * math.log10(power / (m * sigma2))


def rel_change(X_new: np.ndarray, X_old: np.ndarray) -> float:
    """||X_new - X_old||_F / ||X_old||_F."""
    denom = float(np.linalg.norm(X_old))
    if denom == 0.0:
        raise ZeroNormError("relative change against a zero reference")
    return float(np.linalg.norm(np.asarray(X_new) - np.asarray(X_old))) / denom
