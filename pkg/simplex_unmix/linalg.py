"""
Dense linear algebra helpers for preprocessing and the solvers.
"""

import math
from typing import NamedTuple

import numpy as np
from scipy import linalg as sla

from .errors import RankError, ShapeError, SingularMatrixError

SYMMETRY_TOL = 1e-10


class EigPair(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig_top(R: np.ndarray, k: int) -> EigPair:
    """
    Top-k eigenpairs of a symmetric matrix, eigenvalues in descending order.

    Args:
        R: Symmetric M x M matrix (asymmetry above 1e-10 is rejected)
        k: Number of leading eigenpairs, 1 <= k <= M

    Returns:
        EigPair with a deterministic sign per eigenvector
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {R.shape}")
    m = R.shape[0]
    if not 1 <= k <= m:
        raise ShapeError(f"k must be in [1, {m}], got {k}")
    scale = max(1.0, float(np.max(np.abs(R))))
    if np.max(np.abs(R - R.T)) > SYMMETRY_TOL * scale:
        raise ShapeError("matrix is not symmetric")
    values, vectors = np.linalg.eigh(0.5 * (R + R.T))
    order = np.argsort(values)[::-1][:k]
    return EigPair(values=values[order], vectors=_fix_signs(vectors[:, order]))


def pinv_apply_ones(Y: np.ndarray) -> np.ndarray:
    """(Y^T)^+ 1 through a thin SVD of Y; Y must have full row rank."""
    Y = np.asarray(Y, dtype=float)
    n, t = Y.shape
    if t < n:
        raise RankError(f"{n} x {t} data cannot have full row rank")
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    cutoff = s[0] * max(n, t) * np.finfo(float).eps
    if s[-1] <= cutoff:
        raise RankError(f"data is rank deficient (smallest singular value {s[-1]:.3e})")
    return U @ ((Vt @ np.ones(t)) / s)


def cond_2(A: np.ndarray) -> float:
    """Spectral condition number; math.inf when the smallest singular value underflows."""
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    with np.errstate(divide='ignore', over='ignore'):
        ratio = s[0] / s[-1]
    return float(ratio) if np.isfinite(ratio) else math.inf


class SpdFactor:
    """A Cholesky factorization of an SPD matrix, reusable across solves."""

    def __init__(self, H: np.ndarray):
        H = np.asarray(H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ShapeError(f"expected a square matrix, got shape {H.shape}")
        try:
            self._factor = sla.cho_factor(H, lower=True, check_finite=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SingularMatrixError(f"matrix is not positive definite: {e}") from e
        self.n = H.shape[0]

    def solve(self, G: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self._factor, G)


def solve_spd(H: np.ndarray, G: np.ndarray) -> np.ndarray:
    return SpdFactor(H).solve(G)
