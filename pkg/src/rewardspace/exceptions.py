"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data violates a structural requirement (shapes, ranges, stochasticity)."""


class ConfigurationError(RuntimeError):
    """An operation was invoked on an object missing required configuration."""


class NumericalError(RuntimeError):
    """A numerical routine failed in a way that retrying cannot fix (e.g. non-PD kernel)."""


class DivergenceError(RuntimeError):
    """An iterative optimizer produced a non-finite objective.

    Carries the last finite iterate so callers can inspect or salvage it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
