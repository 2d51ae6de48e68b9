"""Exception types shared across the package."""


class RoughcalError(Exception):
    """Base class for package errors."""


class DomainError(RoughcalError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class KernelError(RoughcalError):
    """Sum-of-exponentials generation could not reach the requested accuracy."""

    def __init__(self, message, best_error=None):
        super().__init__(message)
        self.best_error = best_error


class ParseError(RoughcalError, ValueError):
    """A data file is malformed; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class FactorizationError(RoughcalError):
    """A covariance matrix could not be Cholesky-factored within the jitter budget."""


class SimulationError(RoughcalError):
    """A Monte Carlo run produced invalid state (overflow, non-finite values)."""


class InversionError(RoughcalError):
    """An option price lies outside the arbitrage-free band for implied vol."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ConfigError(RoughcalError, ValueError):
    """A run configuration failed schema validation."""
