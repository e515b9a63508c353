"""Exception types shared across the package."""


class DataEnrichError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(DataEnrichError, ValueError):
    """Shape disagreement between dataset, parameters, or constraints.

    ``block`` is the index of the offending block (0 = shared, g >= 1 =
    group g), or None when the mismatch is global.
    """

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class NumericalDivergence(DataEnrichError, ArithmeticError):
    """Non-finite values produced while iterating, typically a step size
    too large for the data."""

    def __init__(self, message, iteration=None, block=None):
        super().__init__(message)
        self.iteration = iteration
        self.block = block


class ConeSamplingError(DataEnrichError, RuntimeError):
    """Rejection sampling failed to produce a cone direction."""


class ConfigError(DataEnrichError, ValueError):
    """Invalid run configuration: unknown keys or out-of-range values."""
