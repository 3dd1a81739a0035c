"""
Numeric kernels shared by every solver.

Gaussian CDF machinery, the proximal operators of the hinge and of -log,
the two projections used by the solvers (affine column-sum set and the
product of unit spheres), log|det| with an explicit singular flag, and the
FISTA extrapolation sequence.

All functions accept scalars or numpy arrays and are elementwise unless stated
otherwise. None of them hold state, so they are safe to call from any thread.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import special

from .errors import ConfigError, ShapeError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
LOG_2 = math.log(2.0)


@dataclass(frozen=True)
class ProbitValue:
    """A standardized score together with Phi(x) and log Phi(x)."""
    x: float
    phi: float
    log_phi: float


def norm_cdf(x):
    """Standard Gaussian CDF, evaluated through the complementary error function."""
    return special.ndtr(x)


def log_norm_cdf(x):
    """
    log Phi(x), stable far into the left tail.

    scipy's log_ndtr switches to an asymptotic series for very negative
    arguments, so this stays finite down to x = -300 and beyond instead of
    underflowing like log(norm_cdf(x)) would.
    """
    return special.log_ndtr(x)


def probit(x: float) -> ProbitValue:
    x = float(x)
    return ProbitValue(x=x, phi=float(norm_cdf(x)), log_phi=float(log_norm_cdf(x)))


def log_norm_pdf(x):
    return -0.5 * np.square(x) - LOG_SQRT_2PI


def mills_ratio(x):
    """phi(x) / Phi(x), computed in the log domain."""
    return np.exp(log_norm_pdf(x) - log_norm_cdf(x))


def hinge(x):
    """hinge(x) = max(-x, 0)."""
    return np.maximum(-np.asarray(x, dtype=float), 0.0)


def hinge_sq(x):
    return np.square(hinge(x))


def hinge_sq_grad(x):
    """Derivative of hinge(x)**2, which is -2 * hinge(x)."""
    return -2.0 * hinge(x)


def prox_hinge(x, c: float):
    """
    argmin_z 0.5*(z - x)**2 + c*hinge(z).

    Args:
        x: Point(s) to evaluate the proximal map at
        c: Hinge weight, must be positive

    Returns:
        x where x >= 0, 0 where -c <= x < 0, x + c where x < -c
    """
    if not c > 0:
        raise ConfigError(f"prox_hinge needs c > 0, got {c!r}")
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0.0, x, np.where(x >= -c, 0.0, x + c))


def prox_neg_log(d, mu: float):
    """
    Proximal map of -sum(log d_i) with step 1/mu: (d + sqrt(d**2 + 4/mu)) / 2.

    For negative d the algebraically equivalent form 2/(mu*(sqrt(d**2 + 4/mu) - d))
    is used so the result keeps full relative precision.
    """
    if not mu > 0:
        raise ConfigError(f"prox_neg_log needs mu > 0, got {mu!r}")
    d = np.asarray(d, dtype=float)
    root = np.sqrt(np.square(d) + 4.0 / mu)
    with np.errstate(divide='ignore'):
        negative_branch = 2.0 / (mu * (root - d))
    return np.where(d >= 0.0, 0.5 * (d + root), negative_branch)


def mm_weight(x_tilde):
    """
    Offset of the quadratic majorant of -log Phi at x_tilde.

    w(x~) = -x~ - phi(x~)/Phi(x~), so that 0.5*(x + w(x~))**2 + r(x~) lies above
    -log Phi(x) everywhere and touches it at x = x~.
    """
    x_tilde = np.asarray(x_tilde, dtype=float)
    return -x_tilde - mills_ratio(x_tilde)


def mm_offset(x_tilde):
    """The constant r(x~) recovered from tangency: -log Phi(x~) - 0.5*(x~ + w(x~))**2."""
    x_tilde = np.asarray(x_tilde, dtype=float)
    w = mm_weight(x_tilde)
    return -log_norm_cdf(x_tilde) - 0.5 * np.square(x_tilde + w)


def mm_majorant(x, x_tilde):
    """0.5*(x + w(x~))**2 + r(x~), an upper bound on -log Phi(x)."""
    w = mm_weight(x_tilde)
    return 0.5 * np.square(np.asarray(x, dtype=float) + w) + mm_offset(x_tilde)


def phi_exp_bound(x):
    """0.5 * exp(sqrt(2/pi) * x), an upper bound on Phi(x) for every x."""
    return 0.5 * np.exp(SQRT_2_OVER_PI * np.asarray(x, dtype=float))


def phi_gauss_bound(x):
    """0.5 * exp(-x**2 / 2), an upper bound on Phi(x) for x <= 0."""
    return 0.5 * np.exp(-0.5 * np.square(x))


class PenaltyCurves(NamedTuple):
    x: np.ndarray
    neg_log_phi: np.ndarray
    hinge_bound: np.ndarray
    hinge_sq_bound: np.ndarray


def surrogate_penalties(x) -> PenaltyCurves:
    """
    The three penalty curves compared against each other.

    -log Phi(x) is the probabilistic penalty. Taking logs of phi_exp_bound gives
    the lower bound max(log 2 - sqrt(2/pi)*x, 0), a shifted hinge. Taking logs of
    phi_gauss_bound gives log 2 + 0.5*hinge(x)**2, a shifted hinge-square that is
    a lower bound on x <= 0 only.
    """
    x = np.asarray(x, dtype=float)
    return PenaltyCurves(
        x=x,
        neg_log_phi=-log_norm_cdf(x),
        hinge_bound=np.maximum(LOG_2 - SQRT_2_OVER_PI * x, 0.0),
        hinge_sq_bound=LOG_2 + 0.5 * hinge_sq(x),
    )


class LogDet(NamedTuple):
    sign: float
    logdet: float
    singular: bool


def log_abs_det(B: np.ndarray) -> LogDet:
    """
    log|det B| through LAPACK's partially pivoted LU (numpy.linalg.slogdet).

    A zero or underflowed pivot shows up as sign 0 / logdet -inf and is
    reported with singular=True; callers turn that into an objective of +inf.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ShapeError(f"log_abs_det needs a square matrix, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        return LogDet(0.0, -math.inf, True)
    sign, logdet = np.linalg.slogdet(B)
    if sign == 0 or not np.isfinite(logdet):
        return LogDet(0.0, -math.inf, True)
    return LogDet(float(sign), float(logdet), False)


def project_affine_colsum(B: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {B : B^T 1 = p}: B - (1/N) 1 (1^T B - p^T)."""
    B = np.asarray(B, dtype=float)
    p = np.asarray(p, dtype=float).reshape(-1)
    if B.shape[1] != p.shape[0]:
        raise ShapeError(f"anchor has {p.shape[0]} entries but B has {B.shape[1]} columns")
    excess = B.sum(axis=0) - p
    return B - excess[np.newaxis, :] / B.shape[0]


def project_rows_unit_sphere(C: np.ndarray, tie_break: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Normalize every row of C to unit Euclidean norm.

    A zero row has no nearest unit vector; it is replaced by tie_break
    (the first standard basis vector when not given).
    """
    C = np.asarray(C, dtype=float)
    if tie_break is None:
        tie_break = np.zeros(C.shape[1])
        tie_break[0] = 1.0
    norms = np.linalg.norm(C, axis=1)
    out = np.empty_like(C)
    nonzero = norms > 0.0
    out[nonzero] = C[nonzero] / norms[nonzero, np.newaxis]
    out[~nonzero] = tie_break
    return out


@dataclass(frozen=True)
class FistaSchedule:
    """
    State of the FISTA sequence.

    t_prev is t_{k-1} and t_cur is t_k for iteration k. The sequence starts
    from t_0 = 1.
    """
    t_prev: float = 1.0
    t_cur: float = 0.5 * (1.0 + math.sqrt(5.0))
    k: int = 1


def _next_t(t: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))


def fista_alpha(schedule: FistaSchedule) -> Tuple[float, FistaSchedule]:
    """Return alpha_k = (t_{k-1} - 1)/t_k and the schedule for iteration k+1."""
    alpha = (schedule.t_prev - 1.0) / schedule.t_cur
    nxt = FistaSchedule(t_prev=schedule.t_cur, t_cur=_next_t(schedule.t_cur), k=schedule.k + 1)
    return alpha, nxt
