"""
Monte Carlo sweeps over (M, N) x T x SNR grids.

Trial t of cell g draws its dataset from the stream (seed_base, g, t) and runs
every configured algorithm on that same dataset. Trials are spread over a
joblib worker pool; results come back in submission order, so the table is
the same whatever the pool size (apart from wall_ms).
"""

import json
import logging
import math
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from . import config as unmix_config
from .errors import ConfigError
from .models import RESULT_COLUMNS, AlgorithmSpec, BenchGrid, ResultRow, SynthSpec
from .pipeline import run_unmix, score_against
from .solvers import get_solver
from .synthetic import generate

logger = logging.getLogger(__name__)

NOISELESS_TOKENS = ('noiseless', 'inf', '+inf')


def _parse_snr(value) -> Optional[float]:
    if value is None:
        return None
    if isinstance(value, str):
        if value.strip().lower() in NOISELESS_TOKENS:
            return None
        value = float(value)
    value = float(value)
    return None if math.isinf(value) and value > 0 else value


def parse_grid(raw: Dict[str, Any]) -> BenchGrid:
    """Build a BenchGrid from its JSON form."""
    try:
        algorithms = []
        for entry in raw['algorithms']:
            if isinstance(entry, str):
                entry = {'name': entry}
            name = entry['name']
            get_solver(name)
            algorithms.append(AlgorithmSpec(name=name, label=entry.get('label', name),
                                            config=dict(entry.get('config', {}))))
        grid = BenchGrid(
            dims=[(int(m), int(n)) for m, n in raw['dims']],
            T_list=[int(t) for t in raw.get('T', raw.get('T_list', []))],
            snr_db_list=[_parse_snr(s) for s in raw.get('snr_db', raw.get('snr_db_list', []))],
            trials=int(raw['trials']),
            algorithms=algorithms,
            seed_base=int(raw.get('seed_base', 0)),
            cond_max=float(raw.get('cond_max', 100.0)),
            kappa=float(raw.get('kappa', 1.2)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid bench grid: {e}")
    return grid.validate()


def load_grid(path: str) -> BenchGrid:
    with open(path) as f:
        return parse_grid(json.load(f))


def _weight(entry, cfg) -> float:
    if entry.weight_field is None or cfg is None:
        return math.nan
    return float(getattr(cfg, entry.weight_field))


def run_trial(grid: BenchGrid, cell_index: int, cell: Tuple[int, int, int, Optional[float]],
              trial: int, solvers: Sequence[Tuple[AlgorithmSpec, Any]]) -> List[ResultRow]:
    """All algorithms on one dataset; failures become rows, not exceptions."""
    m, n, t, snr = cell
    snr_value = math.inf if snr is None else float(snr)

    def error_row(algo, cfg, error, wall_ms):
        return ResultRow(M=m, N=n, T=t, snr_db=snr_value, trial=trial, algorithm=algo.label,
                         lambda_or_tau=_weight(get_solver(algo.name), cfg), mse=math.nan,
                         sad_mean_deg=math.nan, wall_ms=wall_ms,
                         termination=f"error: {type(error).__name__}: {error}",
                         objective_final=math.nan)

    spec = SynthSpec(M=m, N=n, T=t, snr_db=snr, noiseless=snr is None,
                     cond_max=grid.cond_max, seed=grid.seed_base, spawn_key=(cell_index, trial))
    try:
        dataset = generate(spec)
    except Exception as e:
        logger.warning(f"Trial {trial} of cell {cell_index}: no dataset ({e})")
        return [error_row(algo, cfg, e, 0.0) for algo, cfg in solvers]
    truth = dataset.ground_truth
    # no noise-floor eigenvalue exists at M = N, so the generator's sigma stands in
    sigma = math.sqrt(truth.sigma2) if m == n and truth.sigma2 > 0 else None

    rows = []
    for algo, cfg in solvers:
        entry = get_solver(algo.name)
        started = time.perf_counter()
        try:
            result = run_unmix(dataset.Y, n, algo.name, cfg, sigma=sigma, kappa=grid.kappa)
            scores = score_against(result, truth)
            report = result.report
            rows.append(ResultRow(M=m, N=n, T=t, snr_db=snr_value, trial=trial, algorithm=algo.label,
                                  lambda_or_tau=_weight(entry, cfg), mse=scores['mse'],
                                  sad_mean_deg=scores['sad_mean_deg'], wall_ms=report.wall_ms,
                                  termination=report.termination,
                                  objective_final=float(report.objective_final)))
        except Exception as e:
            logger.warning(f"Trial {trial} of cell {cell_index} failed for {algo.label}: {e}")
            rows.append(error_row(algo, cfg, e, 1000.0 * (time.perf_counter() - started)))
    return rows


def resolve_solvers(grid: BenchGrid, config=None) -> List[Tuple[AlgorithmSpec, Any]]:
    """Build each algorithm's config once: INI values, then the grid overrides."""
    return [(algo, get_solver(algo.name).build_config(config, algo.config)) for algo in grid.algorithms]


def pool_size(parallel: int) -> int:
    cap = unmix_config.worker_cap()
    size = max(1, int(parallel))
    return min(size, cap) if cap else size


def run_bench(grid: BenchGrid, parallel: int = 1, config=None) -> pd.DataFrame:
    """Run the whole grid; one row per (cell, trial, algorithm)."""
    solvers = resolve_solvers(grid, config)
    tasks = [(g, cell, trial)
             for g, cell in enumerate(grid.cells())
             for trial in range(grid.trials)]
    workers = pool_size(parallel)
    logger.info(f"Bench: {len(tasks)} trials x {len(solvers)} algorithms on {workers} worker(s)")

    batches = Parallel(n_jobs=workers)(
        delayed(run_trial)(grid, g, cell, trial, solvers) for g, cell, trial in tasks)

    rows = [row.as_tuple() for batch in batches for row in batch]
    return pd.DataFrame(rows, columns=list(RESULT_COLUMNS))


def aggregate(results: pd.DataFrame) -> pd.DataFrame:
    """Mean, standard deviation and median MSE per (M, N, T, SNR, algorithm)."""
    grouped = results.groupby(['M', 'N', 'T', 'snr_db', 'algorithm'], sort=False)
    return grouped.agg(
        mse_mean=('mse', 'mean'),
        mse_std=('mse', 'std'),
        mse_median=('mse', 'median'),
        sad_mean_deg=('sad_mean_deg', 'mean'),
        wall_ms_median=('wall_ms', 'median'),
        trials=('mse', 'count'),
    ).reset_index()


def write_table(frame: pd.DataFrame, path: str):
    frame.to_csv(path, index=False, float_format='%.17g', na_rep='nan')


def median_mse(results: pd.DataFrame, algorithm: str, **cell) -> float:
    """Median MSE of one algorithm label, optionally restricted to a cell (M=..., snr_db=...)."""
    mask = results['algorithm'] == algorithm
    for column, value in cell.items():
        mask &= results[column] == value
    return float(np.median(results.loc[mask, 'mse']))
