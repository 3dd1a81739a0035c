"""
SISAL: minimum-volume simplex with hinge soft constraints.

    minimize  f(B) = -log|det B| + lam * sum_{i,t} hinge(b_i^T y_t)
    s.t.      B^T 1 = p

Each outer iteration linearizes -log|det B| at B^k, solves the resulting
quadratic-plus-hinge subproblem with ADMM, and moves along B_bar - B^k with
either the plain decrease test ('legacy') or the Armijo rule ('armijo').
"""

import logging
import math
import time
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np

from ..errors import ShapeError, SingularMatrixError
from ..kernels import hinge, log_abs_det, project_affine_colsum, prox_hinge
from ..linalg import SpdFactor
from ..metrics import rel_change
from ..models import AdmmConfig, RunReport, SisalConfig, SisalState, config_to_dict

logger = logging.getLogger(__name__)


def sisal_objective(B: np.ndarray, Y: np.ndarray, lam: float) -> float:
    if B.shape[1] != Y.shape[0]:
        raise ShapeError(f"B is {B.shape}, data has {Y.shape[0]} rows")
    ld = log_abs_det(B)
    if ld.singular:
        return math.inf
    return -ld.logdet + lam * float(np.sum(hinge(B @ Y)))


class AdmmResult(NamedTuple):
    B_bar: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool


def penalty_parameter(Y: np.ndarray, mu: float, rho: float) -> float:
    """
    Absolute ADMM penalty for a relative rho.

    In Z = BY coordinates the proximal term has curvature between
    mu/lambda_max(YY^T) and mu/lambda_min(YY^T); rho = 1 lands on the
    geometric mean of the two.
    """
    eig = np.linalg.eigvalsh(Y @ Y.T)
    tiny = np.finfo(float).tiny
    return rho * mu / math.sqrt(max(eig[-1], tiny) * max(eig[0], tiny))


def subproblem_value(B: np.ndarray, B_k: np.ndarray, grad_k: np.ndarray, Y: np.ndarray,
                     lam: float, mu: float) -> float:
    """<grad f0(B_k), B - B_k> + mu/2 ||B - B_k||^2 + lam * sum hinge(BY)."""
    D = B - B_k
    return float(np.sum(grad_k * D) + 0.5 * mu * np.sum(D * D) + lam * np.sum(hinge(B @ Y)))


def admm_subproblem(B_k: np.ndarray, Y: np.ndarray, p: np.ndarray, lam: float, mu: float,
                    admm_cfg: AdmmConfig = AdmmConfig(),
                    factor: Optional[SpdFactor] = None,
                    rho_abs: Optional[float] = None) -> AdmmResult:
    """
    Solve min mu/2 ||B - Q||^2 + lam * sum hinge(BY) s.t. B^T 1 = p.

    Q = B_k + B_k^{-T}/mu. The split is Z = BY with scaled dual U; the
    B-update solves B(mu I + rho YY^T) = mu Q + rho (Z - U) Y^T and restores
    the column sums, which is the exact KKT solution of the constrained
    least-squares step. The iterate with the lowest subproblem value is
    returned (B_k itself when nothing beats it), so B_bar - B_k is always a
    descent direction for the model.
    """
    ld = log_abs_det(B_k)
    if ld.singular:
        raise SingularMatrixError("ADMM subproblem needs an invertible B_k")
    n = B_k.shape[0]
    grad_k = -np.linalg.inv(B_k).T
    Q = B_k - grad_k / mu

    if lam == 0:
        return AdmmResult(project_affine_colsum(Q, p), 0, 0.0, 0.0, True)

    if rho_abs is None:
        rho_abs = penalty_parameter(Y, mu, admm_cfg.rho)
    if factor is None:
        factor = SpdFactor(mu * np.eye(n) + rho_abs * (Y @ Y.T))

    best_B = B_k
    best_value = subproblem_value(B_k, B_k, grad_k, Y, lam, mu)
    Z = B_k @ Y
    U = np.zeros_like(Z)
    primal = dual = math.inf
    converged = False
    it = 0
    for it in range(1, admm_cfg.max_iter + 1):
        rhs = mu * Q + rho_abs * (Z - U) @ Y.T
        # B H = rhs with H symmetric
        B = project_affine_colsum(factor.solve(rhs.T).T, p)
        BY = B @ Y
        Z_old = Z
        Z = prox_hinge(BY + U, lam / rho_abs)
        U = U + BY - Z

        value = float(np.sum(grad_k * (B - B_k)) + 0.5 * mu * np.sum((B - B_k) ** 2)
                      + lam * np.sum(hinge(BY)))
        if value < best_value:
            best_value, best_B = value, B

        primal = float(np.linalg.norm(BY - Z))
        dual = float(rho_abs * np.linalg.norm((Z - Z_old) @ Y.T))
        primal_scale = max(np.linalg.norm(BY), np.linalg.norm(Z), 1.0)
        dual_scale = max(rho_abs * np.linalg.norm(U @ Y.T), 1.0)
        if primal <= admm_cfg.tol_primal * primal_scale and dual <= admm_cfg.tol_dual * dual_scale:
            converged = True
            break

    return AdmmResult(best_B, it, primal, dual, converged)


def _armijo_model(B_bar: np.ndarray, B_k: np.ndarray, grad_k: np.ndarray, Y: np.ndarray,
                  lam: float, mu: float) -> float:
    """h_mu(B_bar, B_k); never positive for the ADMM output."""
    return (subproblem_value(B_bar, B_k, grad_k, Y, lam, mu)
            - subproblem_value(B_k, B_k, grad_k, Y, lam, mu))


def sisal_solve(Y: np.ndarray, p: np.ndarray, B0: np.ndarray,
                cfg: SisalConfig = SisalConfig(),
                callback: Optional[Callable[[int, SisalState], None]] = None
                ) -> Tuple[SisalState, RunReport]:
    """
    Run SISAL from B0.

    Args:
        Y: Reduced data, N x T
        p: Anchor vector, B^T 1 = p is enforced on every iterate
        B0: Invertible start; projected onto the constraint set if needed
        cfg: Solver configuration
        callback: Called as callback(k, state) after each accepted step; state.B_prev,
            state.B_bar and state.theta_trace[-1] describe that step

    Returns:
        Final SisalState and the RunReport
    """
    cfg.validate()
    started = time.perf_counter()
    Y = np.asarray(Y, dtype=float)
    p = np.asarray(p, dtype=float).reshape(-1)
    n = Y.shape[0]
    if B0.shape != (n, n):
        raise ShapeError(f"B0 must be {n} x {n}, got {B0.shape}")

    B = np.asarray(B0, dtype=float)
    if not np.allclose(B.sum(axis=0), p, rtol=0.0, atol=1e-12):
        B = project_affine_colsum(B, p)
    if log_abs_det(B).singular:
        raise SingularMatrixError("initial point is singular after projection onto B^T 1 = p")

    report = RunReport(algorithm='sisal', config=config_to_dict(cfg))
    state = SisalState(B=B, p=p)
    f_B = sisal_objective(B, Y, cfg.lam)
    state.objective_trace.append(f_B)

    rho_abs = penalty_parameter(Y, cfg.mu, cfg.admm.rho)
    factor = SpdFactor(cfg.mu * np.eye(n) + rho_abs * (Y @ Y.T))
    termination = 'max_iter'

    logger.info(f"SISAL start: N={n}, T={Y.shape[1]}, lambda={cfg.lam}, line search={cfg.line_search}")
    for k in range(1, cfg.max_outer + 1):
        grad_k = -np.linalg.inv(B).T
        sub = admm_subproblem(B, Y, p, cfg.lam, cfg.mu, cfg.admm, factor=factor, rho_abs=rho_abs)
        report.inner_iterations.append(sub.iterations)
        D = sub.B_bar - B
        if not np.any(D):
            termination = 'stationary'
            break

        h = _armijo_model(sub.B_bar, B, grad_k, Y, cfg.lam, cfg.mu)
        theta = 1.0
        accepted = None
        for _ in range(cfg.max_halvings + 1):
            candidate = B + theta * D
            f_c = sisal_objective(candidate, Y, cfg.lam)
            if cfg.line_search == 'armijo':
                ok = f_c <= f_B + cfg.beta * theta * h
            else:
                ok = f_c <= f_B
            if ok and math.isfinite(f_c):
                accepted = (candidate, f_c)
                break
            theta *= cfg.delta if cfg.line_search == 'armijo' else 0.5
        if accepted is None:
            termination = 'stalled'
            logger.warning(f"SISAL line search stalled at iteration {k}")
            break

        B_new, f_new = accepted
        change = rel_change(B_new, B)
        state.B_prev, state.B_bar = B, sub.B_bar
        B, f_B = B_new, f_new
        state.B = B
        state.objective_trace.append(f_B)
        state.theta_trace.append(theta)
        logger.debug(f"SISAL k={k} f={f_B:.6e} theta={theta:g} admm={sub.iterations} rc={change:.3e}")
        if callback is not None:
            callback(k, state)
        if change <= cfg.rc_tol:
            termination = 'converged'
            break

    report.objective_trace = list(state.objective_trace)
    report.theta_trace = list(state.theta_trace)
    report.iterations = len(state.theta_trace)
    report.termination = termination
    report.wall_ms = 1000.0 * (time.perf_counter() - started)
    logger.info(f"SISAL done: {termination} after {report.iterations} steps, f={f_B:.6e}")
    return state, report
