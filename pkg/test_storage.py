"""
Tests for dataset, matrix and report files.
"""

import json
import math

import numpy as np

from simplex_unmix.models import Dataset, RunReport, SynthSpec
from simplex_unmix.storage import (
    load_dataset,
    load_matrix_csv,
    save_dataset,
    save_matrix_csv,
    save_report,
    truth_path,
    write_json,
)
from simplex_unmix.synthetic import generate, make_rng


def test_matrix_round_trip_is_exact(tmp_path):
    X = make_rng(1).standard_normal((4, 7)) * 1e-3
    path = str(tmp_path / 'X.csv')
    save_matrix_csv(path, X)
    np.testing.assert_array_equal(load_matrix_csv(path), X)


def test_single_row_stays_two_dimensional(tmp_path):
    path = str(tmp_path / 'row.csv')
    save_matrix_csv(path, np.array([1.0, 2.0, 3.0]))
    assert load_matrix_csv(path).shape == (1, 3)


def test_single_column_keeps_its_shape(tmp_path):
    path = str(tmp_path / 'column.csv')
    column = np.array([[0.25], [0.5], [0.75], [1.0]])
    save_matrix_csv(path, column)
    np.testing.assert_array_equal(load_matrix_csv(path), column)


def test_dataset_with_truth(tmp_path):
    dataset = generate(SynthSpec(M=5, N=3, T=40, snr_db=20.0, seed=9))
    path = save_dataset(dataset, str(tmp_path / 'out'), stem='cube')
    assert path.endswith('cube.csv')
    assert truth_path(path).endswith('cube.truth.json')
    loaded = load_dataset(path)
    np.testing.assert_array_equal(loaded.Y, dataset.Y)
    np.testing.assert_array_equal(loaded.ground_truth.A0, dataset.ground_truth.A0)
    np.testing.assert_array_equal(loaded.ground_truth.S, dataset.ground_truth.S)
    assert loaded.ground_truth.sigma2 == dataset.ground_truth.sigma2
    assert loaded.seed == 9


def test_dataset_without_truth(tmp_path):
    path = save_dataset(Dataset(Y=np.eye(3)), str(tmp_path))
    loaded = load_dataset(path)
    assert loaded.ground_truth is None
    assert not (tmp_path / 'data.truth.json').exists()


def test_json_handles_numpy_and_non_finite_values(tmp_path):
    path = tmp_path / 'values.json'
    write_json(str(path), {'array': np.arange(3), 'nan': math.nan, 'inf': np.float64(math.inf),
                           'flag': np.bool_(True), 'count': np.int64(4)})
    raw = json.loads(path.read_text())
    assert raw == {'array': [0, 1, 2], 'nan': 'nan', 'inf': 'inf', 'flag': True, 'count': 4}


def test_report_with_extra_fields(tmp_path):
    report = RunReport(algorithm='sisal', objective_trace=[3.0, 2.0], termination='converged')
    path = tmp_path / 'report.json'
    save_report(report, str(path), extra={'N': 3})
    raw = json.loads(path.read_text())
    assert raw['algorithm'] == 'sisal'
    assert raw['objective_trace'] == [3.0, 2.0]
    assert raw['N'] == 3
    assert raw['stages'] == []
