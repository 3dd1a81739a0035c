"""
simplex_unmix - simplex-structured matrix factorization.

Recovers the mixing matrix A0 of y_t = A0 s_t + v_t, with s_t on the unit
simplex, by minimum-volume criteria: SISAL, H2-SISAL and the probabilistic
Pr-SISAL, plus the preprocessing, initialization, metrics and Monte Carlo
harness around them.
"""

__version__ = '1.0.0'

from .errors import UnmixError  # noqa: E402
from .models import (  # noqa: E402
    BenchGrid,
    Dataset,
    GroundTruth,
    H2Config,
    PrConfig,
    RunReport,
    SisalConfig,
    SynthSpec,
)
from .pipeline import UnmixResult, run_unmix, score_against  # noqa: E402
from .solvers import ALGORITHMS, get_solver  # noqa: E402
from .synthetic import generate  # noqa: E402

__all__ = [
    'ALGORITHMS',
    'BenchGrid',
    'Dataset',
    'GroundTruth',
    'H2Config',
    'PrConfig',
    'RunReport',
    'SisalConfig',
    'SynthSpec',
    'UnmixError',
    'UnmixResult',
    'generate',
    'get_solver',
    'run_unmix',
    'score_against',
]
