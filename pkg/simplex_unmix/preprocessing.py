"""
Preprocessing around the solvers.

PCA down to the model order (uncentered, on the correlation matrix
R_yy = (1/T) Y Y^T), noise variance from the (N+1)-th eigenvalue of R_yy,
the anchor vector p = A0^{-T} 1 estimated either by the pseudo-inverse
(noiseless identity) or by the second-order statistics
(R_yy - sigma^2 I)^{-1} mu_y, and lifting of reduced estimates back to M
dimensions.
"""

import logging

import numpy as np

from .errors import ConditioningError, ConfigError, NoiseEstimationError, ShapeError
from .linalg import pinv_apply_ones, sym_eig_top
from .models import AnchorEstimate, DrModel

logger = logging.getLogger(__name__)

ANCHOR_METHODS = ('pinv', 'second-order')
SHRINK_FLOOR = 1e-10
CONDITIONING_LIMIT = 1e-12


def correlation_matrix(Y: np.ndarray) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    R = (Y @ Y.T) / Y.shape[1]
    return 0.5 * (R + R.T)


def fit_pca(Y: np.ndarray, n: int) -> DrModel:
    """Top-n eigenvectors of the uncentered correlation matrix."""
    Y = np.asarray(Y, dtype=float)
    m, t = Y.shape
    if t < n:
        raise ShapeError(f"need at least {n} samples for order {n}, got {t}")
    if n > m:
        raise ShapeError(f"model order {n} exceeds data dimension {m}")
    eig = sym_eig_top(correlation_matrix(Y), n)
    return DrModel(U=eig.vectors, original_dim=m, mean_used=False)


def estimate_sigma2(Y: np.ndarray, n: int) -> float:
    """The (n+1)-th largest eigenvalue of R_yy, clamped at zero."""
    Y = np.asarray(Y, dtype=float)
    m = Y.shape[0]
    if m <= n:
        raise NoiseEstimationError(f"cannot estimate noise at M = N = {m}; supply sigma directly")
    eig = sym_eig_top(correlation_matrix(Y), n + 1)
    return max(float(eig.values[n]), 0.0)


def estimate_anchor(Y: np.ndarray, sigma2: float = 0.0, method: str = 'second-order',
                    shrinkage: bool = True) -> AnchorEstimate:
    """
    Estimate p = A0^{-T} 1 from reduced N x T data.

    Args:
        Y: Reduced data
        sigma2: Noise variance (ignored by the pinv method)
        method: 'pinv' for (Y^T)^+ 1, 'second-order' for (R_yy - sigma2 I)^{-1} mu_y
        shrinkage: Floor small eigenvalues of R_yy - sigma2 I at 1e-10 * lambda_max
            instead of failing when the system is near singular

    Returns:
        AnchorEstimate carrying the method and the sigma2 actually used
    """
    Y = np.asarray(Y, dtype=float)
    if method == 'pinv':
        return AnchorEstimate(p=pinv_apply_ones(Y), method='pinv', sigma2_used=0.0)
    if method != 'second-order':
        raise ConfigError(f"unknown anchor method {method!r}, expected one of {ANCHOR_METHODS}")
    if sigma2 < 0:
        raise ConfigError(f"sigma2 must be non-negative, got {sigma2}")

    n = Y.shape[0]
    K = correlation_matrix(Y) - sigma2 * np.eye(n)
    mu_y = Y.mean(axis=1)
    values, vectors = np.linalg.eigh(K)
    top = values[-1]
    if not np.isfinite(top) or top <= 0.0:
        raise ConditioningError("R_yy - sigma2 I has no positive eigenvalue")
    if shrinkage:
        floor = SHRINK_FLOOR * top
        if values[0] < floor:
            logger.debug(f"Flooring {int(np.sum(values < floor))} eigenvalue(s) of R_yy - sigma2 I")
        values = np.maximum(values, floor)
    elif values[0] < CONDITIONING_LIMIT * top:
        raise ConditioningError(f"R_yy - sigma2 I is near singular "
                                f"(smallest eigenvalue {values[0]:.3e}, largest {top:.3e})")
    p = vectors @ ((vectors.T @ mu_y) / values)
    return AnchorEstimate(p=p, method='second-order', sigma2_used=float(sigma2))


def lift_estimate(model: DrModel, A_reduced: np.ndarray) -> np.ndarray:
    A_reduced = np.asarray(A_reduced, dtype=float)
    if A_reduced.shape[0] != model.order:
        raise ShapeError(f"reduced estimate has {A_reduced.shape[0]} rows, model order is {model.order}")
    return model.U @ A_reduced
