"""Exception and warning types shared across the package."""


class ShimsenseError(Exception):
    """Base class for errors raised by this package."""


class ConvergenceError(ShimsenseError):
    """An iterative solver stopped without reaching its tolerance."""

    def __init__(self, message, n_iter=None, residual=None):
        super().__init__(message)
        self.n_iter = n_iter
        self.residual = residual


class DataError(ShimsenseError):
    """Input data violates a shape, format, or range contract."""


class ConfigError(ShimsenseError):
    """A configuration file or mapping is malformed."""


class ConditioningWarning(UserWarning):
    """A least-squares system is rank deficient or badly conditioned."""


class RankDeficiencyWarning(UserWarning):
    """A factorization ran out of numerical rank before finishing."""
