"""
Reading and writing datasets, estimates and run reports.

Matrices are headerless CSV with every value written as "%.17g" so a
round trip through disk is exact. Ground truth for synthetic data sits in a
JSON sidecar next to the data file.
"""

import json
import math
import os
from typing import Any, Optional

import numpy as np

from .models import Dataset, GroundTruth, RunReport

FLOAT_FORMAT = '%.17g'
TRUTH_SUFFIX = '.truth.json'


def save_matrix_csv(path: str, X: np.ndarray):
    np.savetxt(path, np.atleast_2d(X), fmt=FLOAT_FORMAT, delimiter=',')


def load_matrix_csv(path: str) -> np.ndarray:
    return np.loadtxt(path, delimiter=',', dtype=float, ndmin=2)


def truth_path(data_path: str) -> str:
    root, _ = os.path.splitext(data_path)
    return root + TRUTH_SUFFIX


def _json_safe(value: Any):
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(path: str, payload: Any):
    with open(path, 'w') as f:
        json.dump(_json_safe(payload), f, indent=2, sort_keys=True)
        f.write('\n')


def save_dataset(dataset: Dataset, out_dir: str, stem: str = 'data') -> str:
    """Write <stem>.csv (and <stem>.truth.json with ground truth); returns the CSV path."""
    os.makedirs(out_dir, exist_ok=True)
    data_path = os.path.join(out_dir, f'{stem}.csv')
    save_matrix_csv(data_path, dataset.Y)
    truth = dataset.ground_truth
    if truth is not None:
        write_json(truth_path(data_path), {
            'A0': truth.A0,
            'S': truth.S,
            'sigma2': truth.sigma2,
            'seed': dataset.seed,
        })
    return data_path


def load_dataset(data_path: str) -> Dataset:
    Y = load_matrix_csv(data_path)
    sidecar = truth_path(data_path)
    if not os.path.exists(sidecar):
        return Dataset(Y=Y)
    with open(sidecar) as f:
        raw = json.load(f)
    truth = GroundTruth(A0=np.asarray(raw['A0'], dtype=float),
                        S=np.asarray(raw['S'], dtype=float),
                        sigma2=float(raw['sigma2']))
    return Dataset(Y=Y, ground_truth=truth, seed=raw.get('seed'))


def save_report(report: RunReport, path: str, extra: Optional[dict] = None):
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    write_json(path, payload)
