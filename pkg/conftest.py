"""
Shared fixtures: seeded synthetic datasets and their reduced forms.
"""

import numpy as np
import pytest

from simplex_unmix.models import SynthSpec
from simplex_unmix.preprocessing import fit_pca
from simplex_unmix.synthetic import generate, make_rng


@pytest.fixture
def rng():
    return make_rng(20240601)


@pytest.fixture
def noiseless_dataset():
    return generate(SynthSpec(M=10, N=5, T=1000, noiseless=True, seed=3))


@pytest.fixture
def noisy_dataset():
    return generate(SynthSpec(M=10, N=5, T=1000, snr_db=30.0, seed=5))


@pytest.fixture
def small_problem():
    """A reduced 3 x 200 noisy problem with its truth, cheap enough for solver unit tests."""
    dataset = generate(SynthSpec(M=6, N=3, T=200, snr_db=35.0, seed=11))
    dr = fit_pca(dataset.Y, 3)
    return dataset, dr, dr.reduce(dataset.Y)


def random_invertible(rng, n, scale=1.0):
    """Well-conditioned random matrix: identity plus a small perturbation."""
    return scale * (np.eye(n) + 0.3 * rng.standard_normal((n, n)))
