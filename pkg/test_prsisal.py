"""
Tests for Pr-SISAL: objectives, the d-step, the majorized C-step and the drivers.
"""

import math
import os

import numpy as np
import pytest

from conftest import random_invertible
from simplex_unmix.bench import median_mse, parse_grid, run_bench
from simplex_unmix.errors import ConfigError, SingularMatrixError
from simplex_unmix.kernels import log_norm_cdf
from simplex_unmix.models import PrConfig, SynthSpec
from simplex_unmix.pipeline import run_unmix
from simplex_unmix.preprocessing import estimate_anchor
from simplex_unmix.solvers.prsisal import (
    F_eta,
    d_gradient,
    d_objective,
    form2_objective,
    majorant_grad,
    majorant_offset,
    majorant_value,
    majorant_weights,
    pr_direct_objective_and_grad,
    pr_objective_direct,
    pr_solve,
    solve_C,
    solve_d,
    split_rows,
)
from simplex_unmix.synthetic import generate, make_rng
from simplex_unmix.vertex_init import expanded_vertex_init

FAST = PrConfig(outer_max=2, inner_max=4, d_max_iter=2000, c_mm_max_iter=10, c_pg_max_iter=50)


def _central_difference(f, X, h=1e-6):
    grad = np.zeros_like(X)
    for idx in np.ndindex(*X.shape):
        step = np.zeros_like(X)
        step[idx] = h
        grad[idx] = (f(X + step) - f(X - step)) / (2 * h)
    return grad


def _random_unit_rows(rng, n):
    C, _ = split_rows(random_invertible(rng, n))
    return C


def _setup(small_problem):
    dataset, _, Yr = small_problem
    sigma = math.sqrt(dataset.ground_truth.sigma2)
    p = estimate_anchor(Yr, dataset.ground_truth.sigma2, 'second-order').p
    B0 = expanded_vertex_init(Yr, 3).B_init
    return Yr, sigma, p, B0


class TestObjectives:

    def test_zero_data_orthonormal_example(self):
        C, _ = np.linalg.qr(make_rng(1).standard_normal((4, 4)))
        d = np.ones(4)
        p = C.T @ d
        Ybar = np.zeros((4, 30))
        assert F_eta(C, d, Ybar, p, 5.0) == pytest.approx(4 * math.log(2.0), rel=1e-12)
        assert F_eta(C, d, Ybar, p, 5.0, tau=0.25) == pytest.approx(math.log(2.0), rel=1e-12)

    def test_linear_in_eta(self):
        rng = make_rng(2)
        C = _random_unit_rows(rng, 3)
        d = rng.uniform(0.5, 2.0, 3)
        p = rng.standard_normal(3)
        Ybar = rng.standard_normal((3, 20))
        residual = C.T @ d - p
        gap = F_eta(C, d, Ybar, p, 3.0) - F_eta(C, d, Ybar, p, 1.0)
        assert gap == pytest.approx(2.0 * residual @ residual, rel=1e-10)

    def test_domain(self):
        C = np.eye(2)
        assert F_eta(C, np.array([1.0, 0.0]), np.ones((2, 3)), np.ones(2), 1.0) == math.inf
        assert F_eta(np.zeros((2, 2)), np.ones(2), np.ones((2, 3)), np.ones(2), 1.0) == math.inf

    def test_matches_direct_objective_after_change_of_variables(self):
        rng = make_rng(3)
        for _ in range(10):
            C = _random_unit_rows(rng, 3)
            d = rng.uniform(0.2, 3.0, 3)
            p = rng.standard_normal(3)
            Ybar = rng.standard_normal((3, 25))
            eta, tau = 2.5, 0.7
            residual = C.T @ d - p
            without_penalty = F_eta(C, d, Ybar, p, eta, tau) - eta * residual @ residual
            direct = pr_objective_direct(d[:, np.newaxis] * C, Ybar, tau=tau)
            assert without_penalty == pytest.approx(direct, abs=1e-10)

    def test_direct_objective_tau_scales_only_the_phi_term(self):
        rng = make_rng(4)
        B = random_invertible(rng, 3)
        Ybar = rng.standard_normal((3, 40))
        base = -math.log(abs(np.linalg.det(B)))
        one = pr_objective_direct(B, Ybar, tau=1.0) - base
        third = pr_objective_direct(B, Ybar, tau=1.0 / 3.0) - base
        assert third == pytest.approx(one / 3.0, rel=1e-10)

    def test_direct_objective_matches_elementwise_loop(self):
        rng = make_rng(5)
        B = random_invertible(rng, 3)
        Ybar = rng.standard_normal((3, 12))
        total = 0.0
        for i in range(3):
            for t in range(12):
                total += float(log_norm_cdf(B[i] @ Ybar[:, t] / np.linalg.norm(B[i])))
        expected = -math.log(abs(np.linalg.det(B))) - total / 12
        assert pr_objective_direct(B, Ybar) == pytest.approx(expected, rel=1e-10)

    def test_row_scaling_only_moves_the_determinant(self):
        rng = make_rng(6)
        B = random_invertible(rng, 3)
        Ybar = rng.standard_normal((3, 30))
        scale = np.array([0.5, 2.0, 7.0])
        scaled = pr_objective_direct(scale[:, np.newaxis] * B, Ybar)
        assert scaled == pytest.approx(pr_objective_direct(B, Ybar) - np.sum(np.log(scale)), rel=1e-10)

    def test_constraint_check(self):
        B = np.eye(2)
        Ybar = np.ones((2, 4))
        assert math.isfinite(pr_objective_direct(B, Ybar, p=np.ones(2)))
        assert pr_objective_direct(B, Ybar, p=np.array([1.0, 2.0])) == math.inf

    def test_direct_gradient_matches_finite_differences(self):
        rng = make_rng(7)
        B = random_invertible(rng, 3)
        Ybar = rng.standard_normal((3, 30))
        _, grad = pr_direct_objective_and_grad(B, Ybar, tau=0.8)
        numeric = _central_difference(lambda X: pr_direct_objective_and_grad(X, Ybar, 0.8, False)[0], B)
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-7)

    def test_form2_objective(self):
        rng = make_rng(8)
        B = np.diag([1.0, 2.0, 0.5])
        Y = rng.uniform(0.5, 1.5, (3, 10))
        sigma = 3.0
        q = B.sum(axis=0)
        fit = Y.T @ q - 1.0
        phi = sum(float(log_norm_cdf(B[i] @ Y[:, t] / (sigma * np.linalg.norm(B[i]))))
                  for i in range(3) for t in range(10))
        expected = (-math.log(1.0) + math.log(np.linalg.norm(q))
                    + fit @ fit / (2 * sigma ** 2 * 10 * (q @ q)) - phi / 10)
        assert form2_objective(B, Y, sigma) == pytest.approx(expected, rel=1e-10)
        B[1] = 0.0
        assert form2_objective(B, Y, sigma) == math.inf


class TestSolveD:

    def test_identity_root(self):
        for eta in (1.0, 10.0, 1000.0):
            result = solve_d(np.eye(3), np.full(3, 0.3), np.ones(3), eta)
            expected = 0.5 * (1.0 + math.sqrt(1.0 + 2.0 / eta))
            np.testing.assert_allclose(result.d, expected, rtol=1e-8)
            np.testing.assert_allclose(2 * eta * (result.d - 1), 1 / result.d, rtol=1e-6)

    def test_kkt_residual_at_default_tolerance(self):
        rng = make_rng(9)
        for _ in range(200):
            C = _random_unit_rows(rng, 4)
            p = C.T @ rng.uniform(0.5, 2.0, 4)
            eta = float(rng.uniform(0.5, 5.0))
            result = solve_d(C, np.ones(4), p, eta)
            kkt = 2 * eta * C @ (C.T @ result.d - p) - 1 / result.d
            assert np.linalg.norm(kkt) <= 1e-4
            assert result.kkt_residual == pytest.approx(np.linalg.norm(kkt), abs=1e-12)
            assert result.iterations < 10000
            assert np.all(result.d > 0)

    def test_loose_kkt_tolerance_stops_earlier(self):
        rng = make_rng(19)
        C = _random_unit_rows(rng, 4)
        p = C.T @ rng.uniform(0.5, 2.0, 4)
        tight = solve_d(C, np.ones(4), p, 3.0, kkt_tol=1e-8)
        loose = solve_d(C, np.ones(4), p, 3.0, d_rc_tol=1e-2, kkt_tol=1e2)
        assert loose.iterations <= tight.iterations
        assert tight.kkt_residual <= 1e-8

    def test_never_worse_than_start(self):
        rng = make_rng(10)
        C = _random_unit_rows(rng, 3)
        p = rng.standard_normal(3)
        d0 = np.ones(3)
        result = solve_d(C, d0, p, 2.0, max_iter=3)
        assert d_objective(result.d, C, p, 2.0) <= d_objective(d0, C, p, 2.0)

    def test_gradient_of_smooth_part(self):
        rng = make_rng(11)
        C = _random_unit_rows(rng, 3)
        p = rng.standard_normal(3)
        d = rng.uniform(0.5, 2.0, 3)
        smooth = lambda x: d_objective(x, C, p, 1.5) + np.sum(np.log(x))
        numeric = _central_difference(smooth, d)
        np.testing.assert_allclose(d_gradient(d, C, p, 1.5), numeric, rtol=1e-6, atol=1e-8)

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            solve_d(np.eye(2), np.ones(2), np.ones(2), 0.0)
        with pytest.raises(ConfigError):
            solve_d(np.eye(2), np.array([1.0, -1.0]), np.ones(2), 1.0)


class TestCStep:

    def _instance(self, seed):
        rng = make_rng(seed)
        C = _random_unit_rows(rng, 3)
        d = rng.uniform(0.5, 2.0, 3)
        p = rng.standard_normal(3)
        Ybar = 3.0 * rng.standard_normal((3, 50))
        return C, d, p, Ybar

    def test_tangency(self):
        for seed in range(5):
            C, d, p, Ybar = self._instance(100 + seed)
            W, _ = majorant_weights(C, Ybar)
            upper = majorant_value(C, W, d, Ybar, p, 2.0, 0.9) + majorant_offset(C, d, Ybar, 0.9)
            assert upper == pytest.approx(F_eta(C, d, Ybar, p, 2.0, 0.9), abs=1e-9)

    def test_majorizes_away_from_expansion_point(self):
        rng = make_rng(12)
        C, d, p, Ybar = self._instance(12)
        W, _ = majorant_weights(C, Ybar)
        offset = majorant_offset(C, d, Ybar)
        for _ in range(20):
            other = _random_unit_rows(rng, 3)
            assert majorant_value(other, W, d, Ybar, p, 2.0) + offset >= F_eta(other, d, Ybar, p, 2.0) - 1e-9

    def test_majorant_gradient_matches_finite_differences(self):
        C, d, p, Ybar = self._instance(13)
        W, _ = majorant_weights(C, Ybar)
        trial = C + 0.1 * make_rng(14).standard_normal((3, 3))
        numeric = _central_difference(lambda X: majorant_value(X, W, d, Ybar, p, 2.0, 0.5), trial)
        np.testing.assert_allclose(majorant_grad(trial, W, d, Ybar, p, 2.0, 0.5), numeric, rtol=1e-5, atol=1e-7)

    def test_one_step_decreases(self):
        C, d, p, Ybar = self._instance(15)
        result = solve_C(C, d, Ybar, p, 2.0, mm_max_iter=1)
        assert F_eta(result.C, d, Ybar, p, 2.0) < F_eta(C, d, Ybar, p, 2.0)
        assert result.w_evaluations == 1

    def test_trace_non_increasing_and_unit_rows(self):
        C, d, p, Ybar = self._instance(16)
        result = solve_C(C, d, Ybar, p, 2.0, mm_max_iter=20, pg_max_iter=100)
        assert np.all(np.diff(result.objective_trace) <= 1e-10)
        np.testing.assert_allclose(np.linalg.norm(result.C, axis=1), 1.0, atol=1e-10)
        assert result.mm_iterations == len(result.objective_trace)

    def test_singular_start(self):
        C = np.array([[1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(SingularMatrixError):
            solve_C(C, np.ones(2), np.ones((2, 5)), np.ones(2), 1.0)


class TestPrSolve:

    def test_split_rows_round_trip(self):
        B = random_invertible(make_rng(17), 4)
        C, d = split_rows(B)
        np.testing.assert_allclose(d[:, np.newaxis] * C, B, rtol=1e-14)
        np.testing.assert_allclose(np.linalg.norm(C, axis=1), 1.0, atol=1e-12)
        with pytest.raises(SingularMatrixError):
            split_rows(np.array([[1.0, 0.0], [0.0, 0.0]]))

    def test_bcd_descends_within_every_stage(self, small_problem):
        Yr, sigma, p, B0 = _setup(small_problem)
        states = []
        B, report = pr_solve(Yr, sigma, p, B0, FAST, callback=lambda s, k, state: states.append(state))
        assert len(report.stages) == 2
        for stage in report.stages:
            assert np.all(np.diff(stage['F']) <= 1e-9)
            assert stage['sweeps'] == len(stage['d_iterations'])
            assert stage['w_recomputes'] == sum(stage['mm_iterations'])
        assert report.stages[1]['eta'] == pytest.approx(FAST.eta0 * FAST.eta_growth)
        assert len(states) == report.iterations
        for state in states:
            np.testing.assert_allclose(np.linalg.norm(state.C, axis=1), 1.0, atol=1e-10)
            assert np.all(state.d > 0)
        np.testing.assert_allclose(B, states[-1].B)
        assert report.context['sigma'] == sigma
        assert math.isfinite(report.context['objective_direct'])

    def test_direct_modes(self, small_problem):
        Yr, sigma, p, B0 = _setup(small_problem)
        B, report = pr_solve(Yr, sigma, p, B0, PrConfig(mode='pg', direct_max_iter=50))
        assert report.algorithm == 'pr-sisal-pg'
        np.testing.assert_allclose(B.sum(axis=0), p, atol=1e-8)
        assert np.all(np.diff(report.objective_trace) <= 1e-12)

        B, report = pr_solve(Yr, sigma, p, B0, PrConfig(mode='epg', direct_max_iter=50))
        assert report.algorithm == 'pr-sisal-epg'
        np.testing.assert_allclose(B.sum(axis=0), p, atol=1e-8)

    def test_sigma_must_be_positive(self, small_problem):
        Yr, _, p, B0 = _setup(small_problem)
        with pytest.raises(ConfigError):
            pr_solve(Yr, 0.0, p, B0, FAST)


# Acceptance-scale checks. Each grid runs every algorithm on the same seeded
# datasets and spreads the trials over all cores.

WORKERS = os.cpu_count() or 1


def _median_wall_ms(results, algorithm):
    return float(np.median(results.loc[results['algorithm'] == algorithm, 'wall_ms']))


@pytest.mark.slow
def test_stage_objective_never_increases_at_acceptance_scale():
    for seed in range(10):
        dataset = generate(SynthSpec(M=10, N=5, T=1000, snr_db=30.0, seed=940 + seed))
        report = run_unmix(dataset.Y, 5, 'pr-sisal', PrConfig(inner_max=200)).report
        for stage in report.stages:
            F = np.array(stage['F'])
            slack = 1e-10 * np.maximum(1.0, np.abs(F[:-1]))
            assert np.all(np.diff(F) <= slack), f"seed {seed}, eta {stage['eta']}"


@pytest.mark.slow
def test_error_falls_with_snr_and_beats_initializer_at_high_snr():
    grid = parse_grid({
        'dims': [[10, 5]], 'T': [1000], 'snr_db': [20, 30, 40, 50], 'trials': 20, 'seed_base': 900,
        'algorithms': ['vertex', 'pr-sisal'],
    })
    results = run_bench(grid, parallel=WORKERS)
    assert not results['termination'].str.startswith('error').any()
    medians = [median_mse(results, 'pr-sisal', snr_db=snr) for snr in (20.0, 30.0, 40.0, 50.0)]
    assert np.all(np.diff(medians) < 0), medians
    assert medians[-1] * 10 <= median_mse(results, 'vertex', snr_db=50.0)


@pytest.mark.slow
def test_unit_tau_beats_the_lower_bound_variant():
    grid = parse_grid({
        'dims': [[10, 5]], 'T': [1000], 'snr_db': [30], 'trials': 20, 'seed_base': 950,
        'algorithms': [
            {'name': 'pr-sisal', 'label': 'tau-one', 'config': {'tau': 1.0}},
            # rarely meets inner_rc_tol, so each stage is capped at 3000 sweeps
            {'name': 'pr-sisal', 'label': 'tau-low', 'config': {'tau': 1.0 / 6.0, 'inner_max': 3000}},
        ],
    })
    results = run_bench(grid, parallel=WORKERS)
    assert set(results.loc[results['algorithm'] == 'tau-low', 'lambda_or_tau']) == {1.0 / 6.0}
    assert median_mse(results, 'tau-one') < median_mse(results, 'tau-low')


@pytest.mark.slow
def test_direct_projected_gradient_matches_bcd_accuracy_but_is_slower():
    grid = parse_grid({
        'dims': [[20, 10]], 'T': [1000], 'snr_db': [30], 'trials': 5, 'seed_base': 960,
        'algorithms': ['pr-sisal', 'pr-sisal-pg'],
    })
    results = run_bench(grid, parallel=WORKERS)
    assert not results['termination'].str.startswith('error').any()
    assert median_mse(results, 'pr-sisal-pg') <= 2.0 * median_mse(results, 'pr-sisal')
    assert _median_wall_ms(results, 'pr-sisal-pg') >= 3.0 * _median_wall_ms(results, 'pr-sisal')
