"""
The unmixing pipeline shared by the `unmix` and `bench` commands.

normalize (optional) -> PCA to order N -> noise variance (when needed)
-> anchor p -> expanded vertex init -> solver -> invert and lift.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .errors import NoiseEstimationError, SingularMatrixError
from .kernels import log_abs_det
from .metrics import mse, sad
from .models import AnchorEstimate, DrModel, GroundTruth, InitResult, RunReport
from .preprocessing import estimate_anchor, estimate_sigma2, fit_pca, lift_estimate
from .solvers import get_solver
from .synthetic import nmf_normalize
from .vertex_init import expanded_vertex_init

logger = logging.getLogger(__name__)


@dataclass
class UnmixResult:
    A_hat: np.ndarray       # M x N estimate
    B: np.ndarray           # N x N, inverse of the reduced estimate
    report: RunReport
    dr: DrModel
    anchor: AnchorEstimate
    init: InitResult


def run_unmix(Y: np.ndarray, n: int, algorithm: str = 'sisal', solver_config: Any = None,
              sigma: Optional[float] = None, normalize: bool = False, kappa: float = 1.2,
              anchor_method: Optional[str] = None,
              rng: Optional[np.random.Generator] = None) -> UnmixResult:
    """
    Estimate an M x N mixing matrix from M x T data.

    Args:
        Y: Observations, one sample per column
        n: Model order N
        algorithm: A name from simplex_unmix.solvers.SOLVERS
        solver_config: Config object for that solver; defaults when None
        sigma: Noise standard deviation; estimated from the (N+1)-th eigenvalue
            of R_yy when needed and not given (impossible when M = N)
        normalize: Sum-normalize the columns first
        kappa: Vertex expansion factor of the initializer
        anchor_method: Override the solver's default anchor estimator
        rng: Tie-breaking stream for the vertex selection

    Returns:
        UnmixResult with the lifted estimate and the solver's report
    """
    entry = get_solver(algorithm)
    cfg = solver_config if solver_config is not None else entry.build_config()
    Y = np.asarray(Y, dtype=float)
    if normalize:
        Y = nmf_normalize(Y)

    dr = fit_pca(Y, n)
    Yr = dr.reduce(Y)

    method = anchor_method or entry.anchor_method
    sigma2 = None if sigma is None else float(sigma) ** 2
    if sigma2 is None and (entry.needs_sigma or method == 'second-order'):
        sigma2 = estimate_sigma2(Y, n)
        logger.info(f"Estimated noise variance {sigma2:.4e} from the eigenvalue {n + 1} of R_yy")
    anchor = estimate_anchor(Yr, sigma2 or 0.0, method)

    init_started = time.perf_counter()
    init = expanded_vertex_init(Yr, n, kappa, rng)
    init_ms = 1000.0 * (time.perf_counter() - init_started)

    solver_sigma = math.sqrt(sigma2) if sigma2 else None
    if entry.needs_sigma and not solver_sigma:
        raise NoiseEstimationError(f"{algorithm} needs a positive noise level; pass sigma explicitly")

    B, report = entry.runner(Yr, anchor.p, init.B_init, solver_sigma, cfg)
    if entry.name == 'vertex':
        report.wall_ms = init_ms
    if log_abs_det(B).singular:
        raise SingularMatrixError(f"{algorithm} returned a singular B")
    A_hat = lift_estimate(dr, np.linalg.inv(B))

    report.context.update({
        'pca_centered': dr.mean_used,
        'anchor_method': anchor.method,
        'sigma2': anchor.sigma2_used if sigma2 is None else sigma2,
        'kappa': init.expansion,
        'init_columns': list(init.selected_indices),
        'init_ms': init_ms,
        'normalized': normalize,
    })
    return UnmixResult(A_hat=A_hat, B=B, report=report, dr=dr, anchor=anchor, init=init)


def score_against(result: UnmixResult, truth: GroundTruth) -> dict:
    """MSE and mean SAD (degrees) against ground truth; stored in report.metrics."""
    scores = {
        'mse': mse(truth.A0, result.A_hat).score,
        'sad_mean_deg': math.degrees(sad(truth.A0, result.A_hat).score),
    }
    result.report.metrics.update(scores)
    return scores
