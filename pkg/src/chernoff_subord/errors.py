"""Exception and warning types shared across the package."""


class ChernoffError(Exception):
    """Base class for all package errors."""


class DomainError(ChernoffError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(ChernoffError, ArithmeticError):
    """A quadrature or series did not reach its tolerance.

    ``residual`` carries the last error estimate.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericGuardError(NumericError):
    """A negative quadrature weight or kernel value was produced."""


class BudgetExceeded(ChernoffError):
    """The estimated cost of a run exceeds the configured budget."""

    def __init__(self, message, estimate=None, budget=None):
        super().__init__(message)
        self.estimate = estimate
        self.budget = budget


class ConfigError(ChernoffError, ValueError):
    """Invalid experiment configuration. ``field`` and ``line`` locate it."""

    def __init__(self, message, field=None, line=None):
        parts = ([f"field {field}"] if field is not None else []) + \
            ([f"line {line}"] if line is not None else [])
        loc = f" [{', '.join(parts)}]" if parts else ""
        super().__init__(message + loc)
        self.field = field
        self.line = line


class TruncationWarning(UserWarning):
    """Kernel mass leaked past the edge of the discretized domain."""
