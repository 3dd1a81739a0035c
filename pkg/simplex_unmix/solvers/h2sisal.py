"""
H2-SISAL: the hinge-square variant.

    minimize  f0(B) = -log|det B| + lam * sum_{i,t} hinge(b_i^T y_t)^2
    s.t.      B^T 1 = p

f0 is continuously differentiable, so each iteration is a projected
gradient step from an extrapolated point, with backtracking on the
curvature mu_k. The projection onto {B^T 1 = p} is closed form.

The loop itself (extrapolated_projected_gradient) is generic in the
objective and the projection; the direct Pr-SISAL mode reuses it.
"""

import logging
import math
import time
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np

from ..errors import ShapeError, SingularMatrixError
from ..kernels import FistaSchedule, fista_alpha, hinge, log_abs_det, project_affine_colsum
from ..metrics import rel_change
from ..models import H2Config, RunReport, config_to_dict

logger = logging.getLogger(__name__)

ObjectiveFn = Callable[..., Tuple[float, Optional[np.ndarray]]]


class AcceptedStep(NamedTuple):
    """One accepted iterate: B = Pi(B_ex - grad f(B_ex) / mu)."""
    B: np.ndarray
    B_ex: np.ndarray
    mu: float
    alpha: float


def h2_objective_and_grad(B: np.ndarray, Y: np.ndarray, lam: float,
                          with_grad: bool = True) -> Tuple[float, Optional[np.ndarray]]:
    """
    Value and gradient of -log|det B| + lam * sum hinge(BY)^2.

    The gradient is -B^{-T} - 2 lam hinge(BY) Y^T. A singular B gives
    (inf, None).
    """
    ld = log_abs_det(B)
    if ld.singular:
        return math.inf, None
    H = hinge(B @ Y)
    value = -ld.logdet + lam * float(np.sum(H * H))
    if not with_grad:
        return value, None
    grad = -np.linalg.inv(B).T - 2.0 * lam * (H @ Y.T)
    return value, grad


def extrapolated_projected_gradient(objective: ObjectiveFn,
                                    project: Callable[[np.ndarray], np.ndarray],
                                    B0: np.ndarray,
                                    report: RunReport,
                                    beta: float,
                                    nu: float,
                                    c: float,
                                    rc_tol: float,
                                    max_iter: int,
                                    extrapolate: bool = True,
                                    anchor: str = 'extrapolated',
                                    max_backtracks: int = 60,
                                    callback: Optional[Callable[[int, AcceptedStep], None]] = None
                                    ) -> np.ndarray:
    """
    Projected gradient with FISTA extrapolation and backtracking on mu.

    A candidate Pi(B_ex - grad/mu) is accepted when
    f(cand) <= f(anchor) + beta * h, with h = <grad, cand - B_ex> + mu/2 ||cand - B_ex||^2
    and the anchor being B_ex ('extrapolated') or the current iterate
    ('current'). Each search starts at max(nu, mu_{k-1}/c) and multiplies by
    c on rejection. If B_ex is outside the domain the step restarts with
    alpha = 0. Traces and the termination reason are written into report.
    """
    B = np.asarray(B0, dtype=float)
    f_B, g_B = objective(B)
    if not math.isfinite(f_B):
        raise SingularMatrixError("initial point is outside the objective's domain")
    B_prev = B
    schedule = FistaSchedule()
    mu = nu
    report.objective_trace.append(f_B)
    termination = 'max_iter'

    for k in range(1, max_iter + 1):
        alpha = 0.0
        if extrapolate:
            alpha, schedule = fista_alpha(schedule)
        B_ex, f_ex, g_ex = B, f_B, g_B
        if alpha > 0.0:
            trial = B + alpha * (B - B_prev)
            f_trial, g_trial = objective(trial)
            if math.isfinite(f_trial):
                B_ex, f_ex, g_ex = trial, f_trial, g_trial
            else:
                report.restarts += 1
                alpha = 0.0
                logger.debug(f"Extrapolated point singular at k={k}, restarting")

        reference = f_ex if anchor == 'extrapolated' else f_B
        mu_try = max(nu, mu / c)
        accepted = None
        for _ in range(max_backtracks + 1):
            candidate = project(B_ex - g_ex / mu_try)
            f_c, _ = objective(candidate, with_grad=False)
            if math.isfinite(f_c):
                D = candidate - B_ex
                h = float(np.sum(g_ex * D)) + 0.5 * mu_try * float(np.sum(D * D))
                if f_c <= reference + beta * h:
                    accepted = candidate
                    break
            mu_try *= c
        if accepted is None:
            termination = 'stalled'
            logger.warning(f"Backtracking stalled at iteration {k} (mu={mu_try:.3e})")
            break

        mu = mu_try
        change = rel_change(accepted, B)
        B_prev, B = B, accepted
        f_B, g_B = objective(B)
        report.objective_trace.append(f_B)
        report.step_trace.append(mu)
        report.iterations = k
        if callback is not None:
            callback(k, AcceptedStep(B, B_ex, mu, alpha))
        if change <= rc_tol:
            termination = 'converged'
            break

    report.termination = termination
    return B


def h2_solve(Y: np.ndarray, p: np.ndarray, B0: np.ndarray, cfg: H2Config = H2Config(),
             callback: Optional[Callable[[int, AcceptedStep], None]] = None
             ) -> Tuple[np.ndarray, RunReport]:
    """
    Run H2-SISAL from B0.

    Args:
        Y: Reduced data, N x T
        p: Anchor vector
        B0: Invertible start; projected onto B^T 1 = p first
        cfg: Solver configuration
        callback: Called as callback(k, step) with an AcceptedStep after each iterate

    Returns:
        Final B and the RunReport (mu_k trace in step_trace)
    """
    cfg.validate()
    started = time.perf_counter()
    Y = np.asarray(Y, dtype=float)
    p = np.asarray(p, dtype=float).reshape(-1)
    n = Y.shape[0]
    if B0.shape != (n, n):
        raise ShapeError(f"B0 must be {n} x {n}, got {B0.shape}")
    B_start = project_affine_colsum(np.asarray(B0, dtype=float), p)
    if log_abs_det(B_start).singular:
        raise SingularMatrixError("initial point is singular after projection onto B^T 1 = p")

    report = RunReport(algorithm='h2-sisal', config=config_to_dict(cfg))
    logger.info(f"H2-SISAL start: N={n}, T={Y.shape[1]}, lambda={cfg.lam}, extrapolate={cfg.extrapolate}")

    def objective(B, with_grad=True):
        return h2_objective_and_grad(B, Y, cfg.lam, with_grad)

    B = extrapolated_projected_gradient(
        objective, lambda X: project_affine_colsum(X, p), B_start, report,
        beta=cfg.beta, nu=cfg.nu, c=cfg.c, rc_tol=cfg.rc_tol, max_iter=cfg.max_iter,
        extrapolate=cfg.extrapolate, anchor=cfg.anchor, max_backtracks=cfg.max_backtracks,
        callback=callback)

    report.wall_ms = 1000.0 * (time.perf_counter() - started)
    logger.info(f"H2-SISAL done: {report.termination} after {report.iterations} iterations, "
                f"f={report.objective_final:.6e}, restarts={report.restarts}")
    return B, report
