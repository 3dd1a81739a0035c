"""
Solver registry.

Maps the algorithm names accepted by the CLI and bench grids to a runner
with a common signature, the anchor estimator it expects, and whether it
needs a noise level.
"""

from typing import Any, Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np

from .. import config as unmix_config
from ..errors import ConfigError
from ..models import RunReport
from .h2sisal import h2_solve
from .prsisal import pr_solve
from .sisal import sisal_solve

Runner = Callable[[np.ndarray, np.ndarray, np.ndarray, Optional[float], Any], Tuple[np.ndarray, RunReport]]


class SolverEntry(NamedTuple):
    name: str
    runner: Runner
    build_config: Callable[..., Any]
    anchor_method: str
    needs_sigma: bool
    weight_field: Optional[str]     # lam or tau, reported as lambda_or_tau


def _run_sisal(Y, p, B0, sigma, cfg):
    state, report = sisal_solve(Y, p, B0, cfg)
    return state.B, report


def _run_h2(Y, p, B0, sigma, cfg):
    return h2_solve(Y, p, B0, cfg)


def _run_pr(Y, p, B0, sigma, cfg):
    return pr_solve(Y, sigma, p, B0, cfg)


def _run_vertex(Y, p, B0, sigma, cfg):
    return B0, RunReport(algorithm='vertex', termination='init-only')


def _pr_mode(mode):
    def build(config=None, overrides=None):
        merged = dict(overrides or {})
        merged['mode'] = mode
        return unmix_config.pr_config(config, merged)
    return build


def _no_config(config=None, overrides=None):
    return None


SOLVERS: Dict[str, SolverEntry] = {
    'sisal': SolverEntry('sisal', _run_sisal, unmix_config.sisal_config, 'pinv', False, 'lam'),
    'h2-sisal': SolverEntry('h2-sisal', _run_h2, unmix_config.h2_config, 'pinv', False, 'lam'),
    'pr-sisal': SolverEntry('pr-sisal', _run_pr, _pr_mode('bcd'), 'second-order', True, 'tau'),
    'pr-sisal-pg': SolverEntry('pr-sisal-pg', _run_pr, _pr_mode('pg'), 'second-order', True, 'tau'),
    'pr-sisal-epg': SolverEntry('pr-sisal-epg', _run_pr, _pr_mode('epg'), 'second-order', True, 'tau'),
    'vertex': SolverEntry('vertex', _run_vertex, _no_config, 'pinv', False, None),
}

ALGORITHMS = tuple(SOLVERS)


def get_solver(name: str) -> SolverEntry:
    try:
        return SOLVERS[name]
    except KeyError:
        raise ConfigError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
