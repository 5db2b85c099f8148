"""Exception types raised by halfheat."""


class HalfHeatError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HalfHeatError, ValueError):
    """Invalid grid, solver or experiment configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SamplingError(HalfHeatError, ValueError):
    """A sampled field produced a non-finite value."""


class DomainError(HalfHeatError, ValueError):
    """Argument outside the mathematical domain (e.g. t <= 0)."""


class HypothesisViolation(HalfHeatError, ValueError):
    """Parameters violate the existence hypothesis rho/(rho-1) < n-1."""


class NumericalFailure(HalfHeatError, RuntimeError):
    """NaN or overflow encountered during an iteration."""


class RangeError(HalfHeatError, ValueError):
    """Statistic cannot be formed, e.g. norms at the floating-point noise floor."""


class PreconditionError(HalfHeatError, ValueError):
    """Inputs violate a stated precondition, e.g. d1 >= d2."""
