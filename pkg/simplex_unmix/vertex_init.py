"""
Starting points for the solvers.

Vertices are picked by successive projection: repeatedly take the sample
with the largest residual norm and project every sample onto the orthogonal
complement of it. The data are lifted with a constant row of ones first so
the selection respects affine geometry. The selected simplex is then
expanded around its centroid so it encloses the data more comfortably.
"""

import logging
from typing import Optional

import numpy as np

from .errors import ConfigError, DegenerateDataError, ShapeError, SingularMatrixError
from .kernels import log_abs_det
from .models import InitResult

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-12
TIE_TOL = 1e-12


def _invert(A: np.ndarray) -> np.ndarray:
    if log_abs_det(A).singular:
        raise SingularMatrixError("vertex matrix is singular")
    return np.linalg.inv(A)


def successive_projection_init(Y: np.ndarray, n: int,
                               rng: Optional[np.random.Generator] = None) -> InitResult:
    """
    Select n columns of Y as simplex vertices.

    Args:
        Y: Reduced data, n x T
        n: Number of vertices to pick
        rng: Only used to break exact ties between equal residual norms

    Returns:
        InitResult with the selected columns as A_init and their inverse as B_init
    """
    Y = np.asarray(Y, dtype=float)
    t = Y.shape[1]
    if t < n:
        raise ShapeError(f"need at least {n} samples to pick {n} vertices, got {t}")

    residual = np.vstack([Y, np.ones((1, t))])
    first_scale = None
    selected = []
    for j in range(n):
        norms = np.einsum('ij,ij->j', residual, residual)
        norms[selected] = -np.inf
        best = norms.max()
        if first_scale is None:
            first_scale = best
        if not best > RESIDUAL_TOL * first_scale:
            raise DegenerateDataError(f"residual vanished after {j} of {n} vertices")
        candidates = np.flatnonzero(norms >= best * (1.0 - TIE_TOL))
        if rng is not None and candidates.size > 1:
            index = int(rng.choice(candidates))
        else:
            index = int(candidates[0])
        selected.append(index)
        u = residual[:, index] / np.sqrt(norms[index])
        residual = residual - np.outer(u, u @ residual)

    A = Y[:, selected]
    logger.debug(f"Selected vertex columns {selected}")
    return InitResult(A_init=A, B_init=_invert(A), expansion=1.0, selected_indices=tuple(selected))


def expand_vertices(A: np.ndarray, kappa: float, selected_indices=()) -> InitResult:
    """Push each vertex away from the centroid: a_i <- m + kappa*(a_i - m)."""
    if not kappa > 0:
        raise ConfigError(f"expansion factor must be positive, got {kappa}")
    A = np.asarray(A, dtype=float)
    centroid = A.mean(axis=1, keepdims=True)
    expanded = centroid + kappa * (A - centroid)
    return InitResult(A_init=expanded, B_init=_invert(expanded), expansion=float(kappa),
                      selected_indices=tuple(selected_indices))


def expanded_vertex_init(Y: np.ndarray, n: int, kappa: float = 1.2,
                         rng: Optional[np.random.Generator] = None) -> InitResult:
    picked = successive_projection_init(Y, n, rng)
    return expand_vertices(picked.A_init, kappa, picked.selected_indices)
