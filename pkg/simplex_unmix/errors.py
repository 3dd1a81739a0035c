"""
Exception hierarchy for simplex_unmix.

Everything raised on purpose by the library derives from UnmixError so the CLI
can map it to exit code 1. Numerical "+inf" outcomes (a singular B inside an
objective) are not exceptions; they come back as math.inf.
"""


class UnmixError(Exception):
    """Base class for all library errors."""


class ConfigError(UnmixError, ValueError):
    """Invalid hyperparameter, flag or configuration value."""


class ShapeError(UnmixError, ValueError):
    """Array dimensions do not agree with what an operation needs."""


class SingularMatrixError(UnmixError):
    """A matrix that has to be invertible is (numerically) singular."""


class RankError(UnmixError):
    """Data matrix is rank deficient where full row rank is required."""


class ConditioningError(UnmixError):
    """The second-order anchor system is too close to singular."""


class NoiseEstimationError(UnmixError):
    """Noise variance cannot be estimated from the data (M = N)."""


class DegenerateDataError(UnmixError):
    """Vertex selection ran out of residual before picking N columns."""


class GenerationError(UnmixError):
    """Synthetic data generation gave up (condition-number rejection cap)."""


class NormalizationError(UnmixError, ValueError):
    """A column cannot be sum-normalized."""

    def __init__(self, column: int, total: float):
        self.column = column
        self.total = total
        super().__init__(f"column {column} has non-positive sum {total!r}")


class ZeroNormError(UnmixError, ValueError):
    """Reference matrix of a relative change has zero norm."""
