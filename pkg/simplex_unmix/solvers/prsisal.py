"""
Pr-SISAL: probabilistic simplex identification.

The maximum-likelihood-inspired objective

    -log|det B| - (tau/T) sum_{i,t} log Phi(b_i^T y_t / (sigma ||b_i||))   s.t. B^T 1 = p

is solved through the change of variables B = Diag(d) C with unit rows c_i
and d > 0, and the penalized problem

    F_eta(C, d) = -log|det C| - sum log d_i - (tau/T) sum log Phi(c_i^T ybar_t)
                  + eta ||C^T d - p||^2,          ybar_t = y_t / sigma

minimized by block coordinate descent: an accelerated proximal gradient
d-step, and a C-step that majorizes -log Phi by quadratics (so Phi is only
evaluated when the majorant is rebuilt) and runs projected gradient on the
product of unit spheres. eta grows geometrically between stages.

A direct mode ('pg' / 'epg') runs the H2-SISAL loop on the constrained
objective instead; it is much slower and exists for comparison.
"""

import logging
import math
import time
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from ..errors import ConfigError, ShapeError, SingularMatrixError
from ..kernels import (FistaSchedule, fista_alpha, log_abs_det, log_norm_cdf, log_norm_pdf,
                       mm_offset, prox_neg_log, project_affine_colsum, project_rows_unit_sphere)
from ..metrics import rel_change
from ..models import PrConfig, PrState, RunReport, config_to_dict
from .h2sisal import extrapolated_projected_gradient

logger = logging.getLogger(__name__)


# --- Objectives --------------------------------------------------------------

def F_eta(C: np.ndarray, d: np.ndarray, Ybar: np.ndarray, p: np.ndarray,
          eta: float, tau: float = 1.0) -> float:
    """The penalized (C, d) objective; +inf for singular C or non-positive d."""
    ld = log_abs_det(C)
    if ld.singular or np.any(d <= 0.0):
        return math.inf
    t = Ybar.shape[1]
    residual = C.T @ d - p
    return (-ld.logdet - float(np.sum(np.log(d)))
            - tau / t * float(np.sum(log_norm_cdf(C @ Ybar)))
            + eta * float(residual @ residual))


def form2_objective(B: np.ndarray, Y: np.ndarray, sigma: float) -> float:
    """
    Objective before the anchor constraint is imposed (diagnostics only).

    -log|det B| + log||B^T 1|| + ||Y^T B^T 1 - 1||^2 / (2 sigma^2 T ||B^T 1||^2)
    - (1/T) sum log Phi(b_i^T y_t / (sigma ||b_i||))
    """
    ld = log_abs_det(B)
    norms = np.linalg.norm(B, axis=1)
    q = B.sum(axis=0)
    q_norm = float(np.linalg.norm(q))
    if ld.singular or np.any(norms == 0.0) or q_norm == 0.0:
        return math.inf
    t = Y.shape[1]
    fit = Y.T @ q - 1.0
    g = math.log(q_norm) + float(fit @ fit) / (2.0 * sigma ** 2 * t * q_norm ** 2)
    scores = (B @ Y) / (sigma * norms[:, np.newaxis])
    return -ld.logdet + g - float(np.sum(log_norm_cdf(scores))) / t


def pr_objective_direct(B: np.ndarray, Ybar: np.ndarray, p: Optional[np.ndarray] = None,
                        tau: float = 1.0, constraint_tol: float = 1e-8) -> float:
    """
    -log|det B| - (tau/T) sum log Phi(b_i^T ybar_t / ||b_i||).

    When p is given the point must satisfy B^T 1 = p (relative tolerance
    constraint_tol) or the value is +inf.
    """
    if p is not None:
        p = np.asarray(p, dtype=float)
        gap = np.linalg.norm(B.sum(axis=0) - p)
        if gap > constraint_tol * max(1.0, float(np.linalg.norm(p))):
            return math.inf
    value, _ = pr_direct_objective_and_grad(B, Ybar, tau, with_grad=False)
    return value


def pr_direct_objective_and_grad(B: np.ndarray, Ybar: np.ndarray, tau: float = 1.0,
                                 with_grad: bool = True) -> Tuple[float, Optional[np.ndarray]]:
    ld = log_abs_det(B)
    norms = np.linalg.norm(B, axis=1)
    if ld.singular or np.any(norms == 0.0):
        return math.inf, None
    t = Ybar.shape[1]
    X = (B @ Ybar) / norms[:, np.newaxis]
    log_phi = log_norm_cdf(X)
    value = -ld.logdet - tau / t * float(np.sum(log_phi))
    if not with_grad:
        return value, None
    mills = np.exp(log_norm_pdf(X) - log_phi)
    row_weight = np.sum(mills * X, axis=1) / norms
    grad_phi = (mills @ Ybar.T - row_weight[:, np.newaxis] * B) / norms[:, np.newaxis]
    return value, -np.linalg.inv(B).T - tau / t * grad_phi


# --- d-step ------------------------------------------------------------------

class DStepResult(NamedTuple):
    d: np.ndarray
    iterations: int
    kkt_residual: float


def d_objective(d: np.ndarray, C: np.ndarray, p: np.ndarray, eta: float) -> float:
    if np.any(d <= 0.0):
        return math.inf
    residual = C.T @ d - p
    return eta * float(residual @ residual) - float(np.sum(np.log(d)))


def d_gradient(d: np.ndarray, C: np.ndarray, p: np.ndarray, eta: float) -> np.ndarray:
    """Gradient of the smooth part eta ||C^T d - p||^2."""
    return 2.0 * eta * (C @ (C.T @ d - p))


def d_kkt_residual(d: np.ndarray, C: np.ndarray, p: np.ndarray, eta: float) -> float:
    """||2 eta C (C^T d - p) - 1/d||, zero exactly at the minimizer."""
    return float(np.linalg.norm(d_gradient(d, C, p, eta) - 1.0 / d))


def solve_d(C: np.ndarray, d0: np.ndarray, p: np.ndarray, eta: float,
            d_rc_tol: float = 1e-5, max_iter: int = 10000,
            kkt_tol: float = 1e-4) -> DStepResult:
    """
    min_d eta ||C^T d - p||^2 - sum log d_i by accelerated proximal gradient.

    The step is 1/mu with mu = 2 eta sigma_max(C)^2, the exact Lipschitz
    constant of the smooth part; the prox of -log is closed form. Momentum is
    reset whenever the step points against it. The best iterate seen
    (including d0) is returned.

    The loop stops once the relative change is at most d_rc_tol and the
    returned point has a KKT residual of at most kkt_tol; max_iter caps it.
    """
    if not eta > 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    d = np.asarray(d0, dtype=float)
    if np.any(d <= 0.0):
        raise ConfigError("d0 must be strictly positive")
    mu = 2.0 * eta * float(np.linalg.norm(C, 2)) ** 2
    best_d, best_value = d, d_objective(d, C, p, eta)
    d_prev = d
    schedule = FistaSchedule()
    it = 0
    for it in range(1, max_iter + 1):
        alpha, schedule = fista_alpha(schedule)
        d_ex = d + alpha * (d - d_prev)
        d_new = prox_neg_log(d_ex - d_gradient(d_ex, C, p, eta) / mu, mu)
        if float(np.dot(d_ex - d_new, d_new - d)) > 0.0:
            schedule = FistaSchedule()
        change = rel_change(d_new, d)
        d_prev, d = d, d_new
        value = d_objective(d, C, p, eta)
        if value < best_value:
            best_d, best_value = d, value
        if change <= d_rc_tol and d_kkt_residual(best_d, C, p, eta) <= kkt_tol:
            break
    return DStepResult(best_d, it, d_kkt_residual(best_d, C, p, eta))


# --- C-step ------------------------------------------------------------------

class CStepResult(NamedTuple):
    C: np.ndarray
    mm_iterations: int
    pg_iterations: int
    w_evaluations: int
    objective_trace: List[float]
    stalled: bool


def majorant_weights(C: np.ndarray, Ybar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    The offsets W = w(C Ybar) and the log Phi table they were built from.

    This is the only place the C-step evaluates Phi.
    """
    X = C @ Ybar
    log_phi = log_norm_cdf(X)
    W = -X - np.exp(log_norm_pdf(X) - log_phi)
    return W, log_phi


def majorant_value(C: np.ndarray, W: np.ndarray, d: np.ndarray, Ybar: np.ndarray,
                   p: np.ndarray, eta: float, tau: float = 1.0) -> float:
    """
    g0(C) = -log|det C| + (tau/2T) sum (c_i^T ybar_t + w_it)^2 + eta ||C^T d - p||^2.

    Adding majorant_offset at the expansion point gives an upper bound on
    F_eta(C, d) that is tight at the expansion point.
    """
    ld = log_abs_det(C)
    if ld.singular:
        return math.inf
    t = Ybar.shape[1]
    E = C @ Ybar + W
    residual = C.T @ d - p
    return -ld.logdet + 0.5 * tau / t * float(np.sum(E * E)) + eta * float(residual @ residual)


def majorant_grad(C: np.ndarray, W: np.ndarray, d: np.ndarray, Ybar: np.ndarray,
                  p: np.ndarray, eta: float, tau: float = 1.0) -> np.ndarray:
    t = Ybar.shape[1]
    E = C @ Ybar + W
    return (-np.linalg.inv(C).T + tau / t * (E @ Ybar.T)
            + 2.0 * eta * np.outer(d, C.T @ d - p))


def majorant_offset(C_tilde: np.ndarray, d: np.ndarray, Ybar: np.ndarray, tau: float = 1.0) -> float:
    """(tau/T) sum r(c~_i^T ybar_t) - sum log d_i."""
    t = Ybar.shape[1]
    return tau / t * float(np.sum(mm_offset(C_tilde @ Ybar))) - float(np.sum(np.log(d)))


def _minimize_majorant(C_start, W, d, Ybar, p, eta, tau, rc_tol, max_iter, nu, c, max_backtracks):
    """Extrapolated projected gradient for g0 over unit-row matrices."""

    def value(C):
        return majorant_value(C, W, d, Ybar, p, eta, tau)

    best_C, best_value = C_start, value(C_start)
    C, C_prev = C_start, C_start
    schedule = FistaSchedule()
    mu = nu
    stalled = False
    it = 0
    for it in range(1, max_iter + 1):
        alpha, schedule = fista_alpha(schedule)
        C_ex = C + alpha * (C - C_prev) if alpha > 0.0 else C
        v_ex = value(C_ex)
        if not math.isfinite(v_ex):
            C_ex, v_ex = C, value(C)
        grad = majorant_grad(C_ex, W, d, Ybar, p, eta, tau)

        mu_try = max(nu, mu / c)
        accepted = None
        for _ in range(max_backtracks + 1):
            candidate = project_rows_unit_sphere(C_ex - grad / mu_try)
            v_c = value(candidate)
            if math.isfinite(v_c):
                D = candidate - C_ex
                if v_c <= v_ex + float(np.sum(grad * D)) + 0.5 * mu_try * float(np.sum(D * D)):
                    accepted = candidate
                    break
            mu_try *= c
        if accepted is None:
            stalled = True
            break

        mu = mu_try
        change = rel_change(accepted, C)
        C_prev, C = C, accepted
        if v_c < best_value:
            best_C, best_value = C, v_c
        if change <= rc_tol:
            break
    return best_C, it, stalled


def solve_C(C0: np.ndarray, d: np.ndarray, Ybar: np.ndarray, p: np.ndarray, eta: float,
            tau: float = 1.0, mm_rc_tol: float = 1e-5, pg_rc_tol: float = 1e-3,
            mm_max_iter: int = 1000, pg_max_iter: int = 1000,
            nu: float = 1.0, c: float = 2.0, max_backtracks: int = 60) -> CStepResult:
    """
    Majorization-minimization on C with d fixed.

    Each outer iteration rebuilds the quadratic majorant at the current C and
    decreases it by projected gradient. Since the inner loop never returns a
    point worse than its start, F_eta does not increase across outer
    iterations.
    """
    C = project_rows_unit_sphere(np.asarray(C0, dtype=float))
    if log_abs_det(C).singular:
        raise SingularMatrixError("C-step needs an invertible start")
    t = Ybar.shape[1]
    log_d = float(np.sum(np.log(d)))
    trace = []
    pg_total = 0
    stalled = False
    m = 0
    for m in range(1, mm_max_iter + 1):
        W, log_phi = majorant_weights(C, Ybar)
        residual = C.T @ d - p
        trace.append(-log_abs_det(C).logdet - log_d - tau / t * float(np.sum(log_phi))
                     + eta * float(residual @ residual))
        C_new, pg_its, pg_stalled = _minimize_majorant(
            C, W, d, Ybar, p, eta, tau, pg_rc_tol, pg_max_iter, nu, c, max_backtracks)
        pg_total += pg_its
        stalled = stalled or pg_stalled
        change = rel_change(C_new, C)
        C = C_new
        if change <= mm_rc_tol:
            break
    return CStepResult(C, m, pg_total, m, trace, stalled)


# --- Driver ------------------------------------------------------------------

def split_rows(B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """B -> (C, d) with d_i = ||b_i|| and c_i = b_i / d_i."""
    d = np.linalg.norm(B, axis=1)
    if np.any(d == 0.0):
        raise SingularMatrixError(f"row {int(np.flatnonzero(d == 0.0)[0])} of B is zero")
    return B / d[:, np.newaxis], d


def pr_solve(Y: np.ndarray, sigma: float, p: np.ndarray, B0: np.ndarray,
             cfg: PrConfig = PrConfig(),
             callback: Optional[Callable[[int, int, PrState], None]] = None
             ) -> Tuple[np.ndarray, RunReport]:
    """
    Run Pr-SISAL from B0.

    Args:
        Y: Reduced data, N x T
        sigma: Noise standard deviation
        p: Anchor vector
        B0: Invertible start with no zero rows
        cfg: Solver configuration; cfg.mode selects BCD or the direct PG/EPG loop
        callback: BCD only; called as callback(stage, sweep, state) after every sweep

    Returns:
        B = Diag(d) C and the RunReport with one entry per eta stage in report.stages
    """
    cfg.validate()
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    started = time.perf_counter()
    Y = np.asarray(Y, dtype=float)
    p = np.asarray(p, dtype=float).reshape(-1)
    n = Y.shape[0]
    B0 = np.asarray(B0, dtype=float)
    if B0.shape != (n, n):
        raise ShapeError(f"B0 must be {n} x {n}, got {B0.shape}")
    if log_abs_det(B0).singular:
        raise SingularMatrixError("initial point is singular")
    Ybar = Y / sigma

    if cfg.mode in ('pg', 'epg'):
        B, report = _pr_direct(Ybar, p, B0, cfg)
    else:
        B, report = _pr_bcd(Ybar, sigma, p, B0, cfg, callback)

    report.context['sigma'] = float(sigma)
    report.context['objective_direct'] = pr_objective_direct(B, Ybar, tau=cfg.tau)
    report.wall_ms = 1000.0 * (time.perf_counter() - started)
    logger.info(f"Pr-SISAL ({cfg.mode}) done: {report.termination}, {report.iterations} iterations, "
                f"{report.wall_ms:.0f} ms")
    return B, report


def _pr_bcd(Ybar, sigma, p, B0, cfg: PrConfig, callback):
    report = RunReport(algorithm='pr-sisal', config=config_to_dict(cfg))
    C, d = split_rows(B0)
    B = d[:, np.newaxis] * C
    eta = cfg.eta0
    sweeps_total = 0
    budget_hit = False
    logger.info(f"Pr-SISAL start: N={Ybar.shape[0]}, T={Ybar.shape[1]}, tau={cfg.tau}, "
                f"eta0={cfg.eta0}, stages={cfg.outer_max}")

    for stage_index in range(cfg.outer_max):
        stage = {
            'eta': eta,
            'F': [F_eta(C, d, Ybar, p, eta, cfg.tau)],
            'sweeps': 0,
            'w_recomputes': 0,
            'd_iterations': [],
            'd_kkt_max': 0.0,
            'mm_iterations': [],
            'pg_iterations': [],
            'c_step_stalls': 0,
            'termination': 'budget',
        }
        for sweep in range(1, cfg.inner_max + 1):
            d_step = solve_d(C, d, p, eta, cfg.d_rc_tol, cfg.d_max_iter, cfg.d_kkt_tol)
            d = d_step.d
            c_step = solve_C(C, d, Ybar, p, eta, cfg.tau, cfg.c_mm_rc_tol, cfg.c_pg_rc_tol,
                             cfg.c_mm_max_iter, cfg.c_pg_max_iter, cfg.nu, cfg.c, cfg.max_backtracks)
            C = c_step.C
            B_new = d[:, np.newaxis] * C

            stage['sweeps'] = sweep
            stage['w_recomputes'] += c_step.w_evaluations
            stage['d_iterations'].append(d_step.iterations)
            stage['d_kkt_max'] = max(stage['d_kkt_max'], d_step.kkt_residual)
            stage['mm_iterations'].append(c_step.mm_iterations)
            stage['pg_iterations'].append(c_step.pg_iterations)
            stage['c_step_stalls'] += int(c_step.stalled)
            stage['F'].append(F_eta(C, d, Ybar, p, eta, cfg.tau))

            change = rel_change(B_new, B)
            B = B_new
            if callback is not None:
                callback(stage_index, sweep, PrState(C=C, d=d, eta=eta, tau=cfg.tau, sigma=sigma, p=p))
            if change <= cfg.inner_rc_tol:
                stage['termination'] = 'converged'
                break
        budget_hit = budget_hit or stage['termination'] == 'budget'
        sweeps_total += stage['sweeps']
        report.stages.append(stage)
        report.objective_trace.extend(stage['F'][1:])
        report.inner_iterations.append(stage['sweeps'])
        logger.debug(f"Pr-SISAL stage {stage_index}: eta={eta:g}, sweeps={stage['sweeps']}, "
                     f"F={stage['F'][-1]:.6e}")
        eta *= cfg.eta_growth

    report.iterations = sweeps_total
    report.termination = 'budget' if budget_hit else 'converged'
    return B, report


def _pr_direct(Ybar, p, B0, cfg: PrConfig):
    name = 'pr-sisal-epg' if cfg.mode == 'epg' else 'pr-sisal-pg'
    report = RunReport(algorithm=name, config=config_to_dict(cfg))
    B_start = project_affine_colsum(B0, p)
    if log_abs_det(B_start).singular:
        raise SingularMatrixError("initial point is singular after projection onto B^T 1 = p")

    def objective(B, with_grad=True):
        return pr_direct_objective_and_grad(B, Ybar, cfg.tau, with_grad)

    B = extrapolated_projected_gradient(
        objective, lambda X: project_affine_colsum(X, p), B_start, report,
        beta=cfg.direct_beta, nu=cfg.nu, c=cfg.c, rc_tol=cfg.direct_rc_tol,
        max_iter=cfg.direct_max_iter, extrapolate=cfg.mode == 'epg',
        max_backtracks=cfg.max_backtracks)
    return B, report
