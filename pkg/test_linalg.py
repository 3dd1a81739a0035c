"""
Tests for the dense linear algebra helpers.
"""

import math

import numpy as np
import pytest

from simplex_unmix.errors import RankError, ShapeError, SingularMatrixError
from simplex_unmix.linalg import SpdFactor, cond_2, pinv_apply_ones, solve_spd, sym_eig_top
from simplex_unmix.models import SynthSpec
from simplex_unmix.synthetic import generate, make_rng


class TestSymEigTop:

    def test_diagonal(self):
        eig = sym_eig_top(np.diag([3.0, 2.0, 1.0]), 2)
        np.testing.assert_allclose(eig.values, [3.0, 2.0])
        np.testing.assert_allclose(eig.vectors, np.eye(3)[:, :2])

    def test_rank_one(self):
        v = np.array([1.0, 2.0, -3.0]) / np.sqrt(14.0)
        eig = sym_eig_top(np.outer(v, v), 1)
        assert eig.values[0] == pytest.approx(1.0)
        # largest-magnitude entry made positive
        np.testing.assert_allclose(eig.vectors[:, 0], -v, atol=1e-12)

    def test_random_symmetric_matches_full_spectrum(self):
        rng = make_rng(1)
        X = rng.standard_normal((10, 10))
        R = X + X.T
        eig = sym_eig_top(R, 10)
        np.testing.assert_allclose(eig.values, np.sort(np.linalg.eigvalsh(R))[::-1], atol=1e-8)
        np.testing.assert_allclose(eig.vectors.T @ eig.vectors, np.eye(10), atol=1e-10)
        residual = R @ eig.vectors - eig.vectors * eig.values
        assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(R)
        reconstructed = eig.vectors @ np.diag(eig.values) @ eig.vectors.T
        np.testing.assert_allclose(reconstructed, R, atol=1e-8)

    def test_asymmetric_rejected(self):
        with pytest.raises(ShapeError):
            sym_eig_top(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)

    def test_k_out_of_range(self):
        with pytest.raises(ShapeError):
            sym_eig_top(np.eye(3), 4)


class TestPinvApplyOnes:

    def test_identity(self):
        np.testing.assert_allclose(pinv_apply_ones(np.eye(4)), np.ones(4))

    def test_noiseless_identity(self):
        dataset = generate(SynthSpec(M=5, N=5, T=200, noiseless=True, seed=9))
        A0 = dataset.ground_truth.A0
        expected = np.linalg.solve(A0.T, np.ones(5))
        got = pinv_apply_ones(dataset.Y)
        assert np.linalg.norm(got - expected) / np.linalg.norm(expected) <= 1e-8

    def test_matches_explicit_pseudo_inverse(self):
        rng = make_rng(2)
        Y = rng.standard_normal((4, 50))
        np.testing.assert_allclose(pinv_apply_ones(Y), np.linalg.pinv(Y.T) @ np.ones(50), rtol=1e-10)

    def test_permutation_invariant(self):
        rng = make_rng(3)
        Y = rng.standard_normal((3, 40))
        np.testing.assert_allclose(pinv_apply_ones(Y[:, rng.permutation(40)]), pinv_apply_ones(Y), rtol=1e-10)

    def test_rank_deficient_rejected(self):
        Y = np.ones((2, 10))
        with pytest.raises(RankError):
            pinv_apply_ones(Y)
        with pytest.raises(RankError):
            pinv_apply_ones(np.ones((3, 2)))


class TestCond2:

    def test_examples(self):
        assert cond_2(np.eye(3)) == pytest.approx(1.0)
        assert cond_2(np.diag([10.0, 0.1])) == pytest.approx(100.0)

    def test_scale_invariant(self):
        rng = make_rng(4)
        A = rng.standard_normal((10, 5))
        s = np.sqrt(np.linalg.eigvalsh(A.T @ A))
        assert cond_2(A) == pytest.approx(s[-1] / s[0], rel=1e-8)
        assert cond_2(7.5 * A) == pytest.approx(cond_2(A), rel=1e-10)

    def test_singular_is_infinite(self):
        assert cond_2(np.array([[1.0, 0.0], [0.0, 0.0]])) == math.inf


class TestSolveSpd:

    def test_examples(self):
        G = np.arange(6.0).reshape(3, 2)
        np.testing.assert_allclose(solve_spd(np.eye(3), G), G)
        np.testing.assert_allclose(solve_spd(2 * np.eye(3), np.ones(3)), np.full(3, 0.5))

    def test_factor_is_reusable(self):
        rng = make_rng(5)
        X = rng.standard_normal((6, 6))
        H = X @ X.T + 6 * np.eye(6)
        factor = SpdFactor(H)
        for _ in range(3):
            G = rng.standard_normal((6, 4))
            assert np.linalg.norm(H @ factor.solve(G) - G) <= 1e-9 * np.linalg.norm(G)

    def test_not_positive_definite(self):
        with pytest.raises(SingularMatrixError):
            SpdFactor(np.diag([1.0, -1.0]))
