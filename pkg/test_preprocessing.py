"""
Tests for PCA reduction, noise estimation, the anchor estimators and lifting.
"""

import numpy as np
import pytest

from simplex_unmix.errors import ConditioningError, ConfigError, NoiseEstimationError, ShapeError
from simplex_unmix.models import DrModel, SynthSpec
from simplex_unmix.preprocessing import (
    correlation_matrix,
    estimate_anchor,
    estimate_sigma2,
    fit_pca,
    lift_estimate,
)
from simplex_unmix.synthetic import generate, make_rng


def _relative_anchor_error(p, A0):
    expected = np.linalg.solve(A0.T, np.ones(A0.shape[1]))
    return np.linalg.norm(p - expected) / np.linalg.norm(expected)


def _reduced_truth(dr, A0):
    return dr.reduce(A0)


class TestFitPca:

    def test_square_case_spans_everything(self):
        dataset = generate(SynthSpec(M=4, N=4, T=100, snr_db=20.0, seed=1))
        dr = fit_pca(dataset.Y, 4)
        np.testing.assert_allclose(dr.U.T @ dr.U, np.eye(4), atol=1e-10)
        np.testing.assert_allclose(lift_estimate(dr, dr.reduce(dataset.Y)), dataset.Y, atol=1e-10)
        assert dr.mean_used is False

    def test_noiseless_reconstruction(self, noiseless_dataset):
        Y = noiseless_dataset.Y
        dr = fit_pca(Y, 5)
        assert np.linalg.norm(dr.U @ dr.U.T @ Y - Y) / np.linalg.norm(Y) <= 1e-8

    def test_noisy_subspace_close_to_signal_subspace(self):
        dataset = generate(SynthSpec(M=10, N=5, T=10_000, snr_db=30.0, seed=2))
        truth = dataset.ground_truth
        U_noisy = fit_pca(dataset.Y, 5).U
        U_clean = fit_pca(truth.A0 @ truth.S, 5).U
        cosines = np.linalg.svd(U_clean.T @ U_noisy, compute_uv=False)
        assert np.arccos(np.clip(cosines.min(), -1, 1)) <= 0.1

    def test_sample_permutation_invariant(self, noisy_dataset):
        Y = noisy_dataset.Y
        shuffled = Y[:, make_rng(3).permutation(Y.shape[1])]
        np.testing.assert_allclose(fit_pca(shuffled, 5).U, fit_pca(Y, 5).U, atol=1e-8)

    def test_too_few_samples(self):
        with pytest.raises(ShapeError):
            fit_pca(np.ones((5, 3)), 4)


class TestEstimateSigma2:

    def test_noiseless_is_zero(self, noiseless_dataset):
        R = correlation_matrix(noiseless_dataset.Y)
        assert estimate_sigma2(noiseless_dataset.Y, 5) <= 1e-10 * np.linalg.norm(R)

    def test_close_to_generator_value(self):
        dataset = generate(SynthSpec(M=10, N=5, T=100_000, snr_db=30.0, seed=4))
        assert estimate_sigma2(dataset.Y, 5) == pytest.approx(dataset.ground_truth.sigma2, rel=0.1)

    def test_square_case_refused(self):
        with pytest.raises(NoiseEstimationError):
            estimate_sigma2(np.ones((5, 10)), 5)


class TestEstimateAnchor:

    def test_pinv_recovers_anchor_on_noiseless_data(self, noiseless_dataset):
        dr = fit_pca(noiseless_dataset.Y, 5)
        anchor = estimate_anchor(dr.reduce(noiseless_dataset.Y), method='pinv')
        assert anchor.method == 'pinv'
        A_reduced = _reduced_truth(dr, noiseless_dataset.ground_truth.A0)
        assert _relative_anchor_error(anchor.p, A_reduced) <= 1e-8

    def test_second_order_with_true_sigma(self):
        errors = []
        for seed in range(5):
            dataset = generate(SynthSpec(M=5, N=5, T=100_000, snr_db=30.0, seed=seed))
            anchor = estimate_anchor(dataset.Y, dataset.ground_truth.sigma2, 'second-order')
            errors.append(_relative_anchor_error(anchor.p, dataset.ground_truth.A0))
        assert np.median(errors) <= 0.05

    def test_zero_sigma_is_plain_correlation_solve(self, noisy_dataset):
        Y = noisy_dataset.Y[:5]
        anchor = estimate_anchor(Y, 0.0, 'second-order')
        expected = np.linalg.solve(correlation_matrix(Y), Y.mean(axis=1))
        np.testing.assert_allclose(anchor.p, expected, rtol=1e-8)
        assert anchor.sigma2_used == 0.0

    def test_strict_mode_refuses_near_singular_system(self):
        rng = make_rng(5)
        Y = rng.uniform(0, 1, (3, 200))
        # subtract enough variance to leave R - sigma2 I singular along one direction
        smallest = np.linalg.eigvalsh(correlation_matrix(Y))[0]
        with pytest.raises(ConditioningError):
            estimate_anchor(Y, smallest, 'second-order', shrinkage=False)
        shrunk = estimate_anchor(Y, smallest, 'second-order', shrinkage=True)
        assert np.all(np.isfinite(shrunk.p))

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            estimate_anchor(np.eye(3), method='magic')

    def test_anchor_error_shrinks_with_more_samples(self):
        medians = []
        for t in (1_000, 10_000, 100_000):
            errors = []
            for seed in range(7):
                dataset = generate(SynthSpec(M=5, N=5, T=t, snr_db=30.0, seed=100 + seed))
                anchor = estimate_anchor(dataset.Y, dataset.ground_truth.sigma2, 'second-order')
                errors.append(_relative_anchor_error(anchor.p, dataset.ground_truth.A0))
            medians.append(np.median(errors))
        assert medians[0] >= medians[1] >= medians[2]


class TestLiftEstimate:

    def test_identity_basis(self):
        A = make_rng(6).standard_normal((3, 3))
        np.testing.assert_array_equal(lift_estimate(DrModel(U=np.eye(3), original_dim=3), A), A)

    def test_round_trip_and_norm(self, noiseless_dataset):
        dr = fit_pca(noiseless_dataset.Y, 5)
        A0 = noiseless_dataset.ground_truth.A0
        lifted = lift_estimate(dr, dr.reduce(A0))
        np.testing.assert_allclose(lifted, A0, atol=1e-8)
        A_hat = make_rng(7).standard_normal((5, 5))
        assert np.linalg.norm(lift_estimate(dr, A_hat)) == pytest.approx(np.linalg.norm(A_hat), rel=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            lift_estimate(DrModel(U=np.eye(4)[:, :2], original_dim=4), np.eye(3))
