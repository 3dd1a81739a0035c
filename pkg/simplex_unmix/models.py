"""
Domain types for simplex_unmix.

Configuration objects are frozen dataclasses with a validate() step; result and
state objects are plain dataclasses. Arrays are numpy float64 throughout.
"""

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


# --- Data --------------------------------------------------------------------

@dataclass
class GroundTruth:
    A0: np.ndarray          # M x N mixing matrix
    S: np.ndarray           # N x T latent simplex coordinates
    sigma2: float           # noise variance, 0 for noiseless data


@dataclass
class Dataset:
    Y: np.ndarray                       # M x T, columns are samples
    ground_truth: Optional[GroundTruth] = None
    seed: Optional[int] = None

    @property
    def shape(self) -> Tuple[int, int]:
        return self.Y.shape


@dataclass(frozen=True)
class SynthSpec:
    M: int
    N: int
    T: int
    snr_db: Optional[float] = None
    noiseless: bool = False
    cond_max: float = 100.0
    seed: int = 0
    spawn_key: Tuple[int, ...] = ()

    def validate(self):
        _require(self.M >= self.N >= 2, f"need M >= N >= 2, got M={self.M}, N={self.N}")
        _require(self.T >= self.N, f"need T >= N, got T={self.T}, N={self.N}")
        _require(self.cond_max > 1, f"cond_max must exceed 1, got {self.cond_max}")
        if not self.noiseless:
            _require(self.snr_db is not None and not math.isnan(self.snr_db),
                     "snr_db is required unless noiseless is set")
        return self

    @property
    def is_noiseless(self) -> bool:
        return self.noiseless or self.snr_db == math.inf


# --- Preprocessing -----------------------------------------------------------

@dataclass(frozen=True)
class DrModel:
    U: np.ndarray           # M x N orthonormal basis
    original_dim: int
    mean_used: bool = False  # the PCA is uncentered

    @property
    def order(self) -> int:
        return self.U.shape[1]

    def reduce(self, Y: np.ndarray) -> np.ndarray:
        return self.U.T @ Y


@dataclass(frozen=True)
class AnchorEstimate:
    p: np.ndarray
    method: str             # 'pinv' or 'second-order'
    sigma2_used: float = 0.0


@dataclass(frozen=True)
class InitResult:
    A_init: np.ndarray
    B_init: np.ndarray
    expansion: float = 1.0
    selected_indices: Tuple[int, ...] = ()


@dataclass(frozen=True)
class InitConfig:
    kappa: float = 1.2

    def validate(self):
        _require(self.kappa >= 1.0, f"expansion factor must be >= 1, got {self.kappa}")
        return self


# --- Solver configuration ----------------------------------------------------

@dataclass(frozen=True)
class AdmmConfig:
    rho: float = 1.0          # relative to the data scale, see solvers.sisal
    max_iter: int = 200
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6

    def validate(self):
        _require(self.rho > 0, f"admm rho must be positive, got {self.rho}")
        _require(self.max_iter >= 1, f"admm max_iter must be >= 1, got {self.max_iter}")
        _require(self.tol_primal > 0 and self.tol_dual > 0, "admm tolerances must be positive")
        return self


@dataclass(frozen=True)
class SisalConfig:
    lam: float = 0.1
    mu: float = 1.0
    max_outer: int = 250
    line_search: str = 'armijo'
    beta: float = 1e-4
    delta: float = 0.5
    rc_tol: float = 1e-9
    max_halvings: int = 60
    admm: AdmmConfig = field(default_factory=AdmmConfig)

    def validate(self):
        _require(self.lam >= 0, f"lambda must be non-negative, got {self.lam}")
        _require(self.mu > 0, f"mu must be positive, got {self.mu}")
        _require(self.max_outer >= 1, f"max_outer must be >= 1, got {self.max_outer}")
        _require(self.line_search in ('armijo', 'legacy'),
                 f"line_search must be 'armijo' or 'legacy', got {self.line_search!r}")
        _require(0 < self.beta < 1, f"beta must lie in (0, 1), got {self.beta}")
        _require(0 < self.delta < 1, f"delta must lie in (0, 1), got {self.delta}")
        _require(self.rc_tol > 0, "rc_tol must be positive")
        self.admm.validate()
        return self


@dataclass(frozen=True)
class H2Config:
    lam: float = 10.0
    beta: float = 0.5
    nu: float = 1.0
    c: float = 2.0
    rc_tol: float = 1e-6
    max_iter: int = 10000
    extrapolate: bool = True
    anchor: str = 'extrapolated'    # or 'current'
    max_backtracks: int = 60

    def validate(self):
        _require(self.lam >= 0, f"lambda must be non-negative, got {self.lam}")
        _require(0 < self.beta < 1, f"beta must lie in (0, 1), got {self.beta}")
        _require(self.nu > 0, f"nu must be positive, got {self.nu}")
        _require(self.c > 1, f"backtracking growth c must exceed 1, got {self.c}")
        _require(self.rc_tol > 0, "rc_tol must be positive")
        _require(self.max_iter >= 1, f"max_iter must be >= 1, got {self.max_iter}")
        _require(self.anchor in ('extrapolated', 'current'),
                 f"anchor must be 'extrapolated' or 'current', got {self.anchor!r}")
        return self


@dataclass(frozen=True)
class PrConfig:
    mode: str = 'bcd'               # 'bcd', or 'pg' / 'epg' on the direct objective
    tau: float = 1.0
    eta0: float = 1.0
    eta_growth: float = 5.0
    outer_max: int = 10
    inner_rc_tol: float = 1e-7
    inner_max: int = 400000         # BCD sweeps per eta stage
    d_rc_tol: float = 1e-5
    d_max_iter: int = 10000
    d_kkt_tol: float = 1e-4
    c_mm_rc_tol: float = 1e-5
    c_mm_max_iter: int = 1000
    c_pg_rc_tol: float = 1e-3
    c_pg_max_iter: int = 1000
    nu: float = 1.0
    c: float = 2.0
    max_backtracks: int = 60
    direct_beta: float = 0.5
    direct_rc_tol: float = 1e-8
    direct_max_iter: int = 400000

    def validate(self):
        _require(self.mode in ('bcd', 'pg', 'epg'), f"unknown Pr-SISAL mode {self.mode!r}")
        _require(self.tau > 0, f"tau must be positive, got {self.tau}")
        _require(self.eta0 > 0, f"eta0 must be positive, got {self.eta0}")
        _require(self.eta_growth > 1, f"eta growth must exceed 1, got {self.eta_growth}")
        _require(self.outer_max >= 1, "outer_max must be >= 1")
        _require(self.inner_max >= 1, "inner_max must be >= 1")
        _require(self.c > 1, f"backtracking growth c must exceed 1, got {self.c}")
        _require(self.nu > 0, f"nu must be positive, got {self.nu}")
        _require(0 < self.direct_beta < 1, "direct_beta must lie in (0, 1)")
        for name in ('inner_rc_tol', 'd_rc_tol', 'd_kkt_tol', 'c_mm_rc_tol', 'c_pg_rc_tol', 'direct_rc_tol'):
            _require(getattr(self, name) > 0, f"{name} must be positive")
        return self


def config_to_dict(cfg) -> Dict[str, Any]:
    return asdict(cfg)


# --- Solver state and reports ------------------------------------------------

@dataclass
class SisalState:
    B: np.ndarray
    p: np.ndarray
    objective_trace: List[float] = field(default_factory=list)
    theta_trace: List[float] = field(default_factory=list)
    # the last accepted step was B = B_prev + theta * (B_bar - B_prev)
    B_prev: Optional[np.ndarray] = None
    B_bar: Optional[np.ndarray] = None


@dataclass
class PrState:
    C: np.ndarray
    d: np.ndarray
    eta: float
    tau: float
    sigma: float
    p: np.ndarray

    @property
    def B(self) -> np.ndarray:
        return self.d[:, np.newaxis] * self.C


@dataclass
class RunReport:
    """Everything a solve records about itself, serialized as JSON."""
    algorithm: str
    config: Dict[str, Any] = field(default_factory=dict)
    objective_trace: List[float] = field(default_factory=list)
    theta_trace: List[float] = field(default_factory=list)
    step_trace: List[float] = field(default_factory=list)      # accepted mu_k
    inner_iterations: List[int] = field(default_factory=list)
    stages: List[Dict[str, Any]] = field(default_factory=list)  # per-eta traces
    restarts: int = 0
    iterations: int = 0
    termination: str = ''
    wall_ms: float = 0.0
    context: Dict[str, Any] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)

    @property
    def objective_final(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else math.nan

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class MatchResult:
    score: float
    permutation: List[int]          # 0-based: column i of A0 matches column permutation[i]
    per_column: np.ndarray


# --- Bench -------------------------------------------------------------------

@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    label: str
    config: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class BenchGrid:
    dims: List[Tuple[int, int]]
    T_list: List[int]
    snr_db_list: List[Optional[float]]      # None means noiseless
    trials: int
    algorithms: List[AlgorithmSpec]
    seed_base: int = 0
    cond_max: float = 100.0
    kappa: float = 1.2

    def cells(self) -> List[Tuple[int, int, int, Optional[float]]]:
        return [(m, n, t, snr)
                for (m, n) in self.dims
                for t in self.T_list
                for snr in self.snr_db_list]

    def validate(self):
        _require(len(self.dims) > 0, "grid needs at least one (M, N) pair")
        _require(len(self.T_list) > 0, "grid needs at least one T")
        _require(len(self.snr_db_list) > 0, "grid needs at least one SNR")
        _require(self.trials >= 1, "trials must be >= 1")
        _require(len(self.algorithms) > 0, "grid needs at least one algorithm")
        labels = [a.label for a in self.algorithms]
        _require(len(set(labels)) == len(labels), f"algorithm labels must be unique: {labels}")
        return self


RESULT_COLUMNS = ('M', 'N', 'T', 'snr_db', 'trial', 'algorithm', 'lambda_or_tau',
                  'mse', 'sad_mean_deg', 'wall_ms', 'termination', 'objective_final')


@dataclass(frozen=True)
class ResultRow:
    M: int
    N: int
    T: int
    snr_db: float
    trial: int
    algorithm: str
    lambda_or_tau: float
    mse: float
    sad_mean_deg: float
    wall_ms: float
    termination: str
    objective_final: float

    def as_tuple(self):
        return tuple(getattr(self, name) for name in RESULT_COLUMNS)
