"""
Synthetic data following the linear mixing model y_t = A0 s_t + v_t.

s_t is uniform on the unit simplex, A0 has i.i.d. U[0, 1] entries and is
redrawn until its condition number is acceptable, and v_t is white Gaussian
noise calibrated to a target SNR. Every draw comes from an explicit
numpy Generator so trials are reproducible and independent.
"""

import logging
from typing import Optional

import numpy as np

from .errors import GenerationError, NormalizationError
from .linalg import cond_2
from .models import Dataset, GroundTruth, SynthSpec

logger = logging.getLogger(__name__)

MAX_MIXING_DRAWS = 10_000


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based Philox generator for the stream (seed, *keys)."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def sample_unit_simplex(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """n x count matrix of i.i.d. Dirichlet(1, ..., 1) columns."""
    draws = rng.standard_exponential((n, count))
    return draws / draws.sum(axis=0, keepdims=True)


def noise_variance(X: np.ndarray, snr_db: float) -> float:
    """sigma^2 such that (1/T) sum ||x_t||^2 / (M sigma^2) equals the SNR."""
    m, _ = X.shape
    power = float(np.mean(np.sum(X * X, axis=0)))
    return power / (m * 10.0 ** (snr_db / 10.0))


def draw_mixing_matrix(m: int, n: int, cond_max: float, rng: np.random.Generator) -> np.ndarray:
    for attempt in range(1, MAX_MIXING_DRAWS + 1):
        A0 = rng.uniform(0.0, 1.0, size=(m, n))
        if cond_2(A0) <= cond_max:
            if attempt > 1:
                logger.debug(f"Mixing matrix accepted after {attempt} draws")
            return A0
    raise GenerationError(f"no {m} x {n} mixing matrix with condition number <= {cond_max} "
                          f"in {MAX_MIXING_DRAWS} draws")


def generate(spec: SynthSpec) -> Dataset:
    spec.validate()
    rng = make_rng(spec.seed, *spec.spawn_key)

    A0 = draw_mixing_matrix(spec.M, spec.N, spec.cond_max, rng)
    S = sample_unit_simplex(spec.N, spec.T, rng)
    X = A0 @ S

    if spec.is_noiseless:
        return Dataset(Y=X, ground_truth=GroundTruth(A0=A0, S=S, sigma2=0.0), seed=spec.seed)

    sigma2 = noise_variance(X, spec.snr_db)
    V = rng.normal(0.0, np.sqrt(sigma2), size=X.shape)
    return Dataset(Y=X + V, ground_truth=GroundTruth(A0=A0, S=S, sigma2=sigma2), seed=spec.seed)


def empirical_snr_db(dataset: Dataset) -> Optional[float]:
    """SNR measured against the realized noise; None without ground truth."""
    truth = dataset.ground_truth
    if truth is None:
        return None
    X = truth.A0 @ truth.S
    noise = dataset.Y - X
    m, t = X.shape
    noise_power = float(np.sum(noise * noise)) / (m * t)
    if noise_power == 0.0:
        return float('inf')
    signal_power = float(np.mean(np.sum(X * X, axis=0))) / m
    return 10.0 * np.log10(signal_power / noise_power)


def nmf_normalize(Z: np.ndarray) -> np.ndarray:
    """Divide every column by its entry sum so the columns live on the simplex."""
    Z = np.asarray(Z, dtype=float)
    totals = Z.sum(axis=0)
    bad = np.flatnonzero(~(totals > 0.0))
    if bad.size:
        raise NormalizationError(int(bad[0]), float(totals[bad[0]]))
    return Z / totals
