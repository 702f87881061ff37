"""Exception types raised across the package."""


class SpecstopError(Exception):
    """Base class for all package errors."""


class InvalidArgument(SpecstopError, ValueError):
    pass


class ConfigError(SpecstopError, ValueError):
    pass


class DegenerateOperatorError(SpecstopError):
    pass


class DegenerateNoiseError(SpecstopError):
    pass


class InsufficientSamples(SpecstopError, ValueError):
    pass


class UndefinedRelativeError(SpecstopError, ValueError):
    pass


class NumericalFailure(SpecstopError):
    """Raised when a decomposition does not reach its accuracy target."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
