"""Exception hierarchy shared by every module."""


class TcfouError(Exception):
    """Base class for all package errors."""


class DomainError(TcfouError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AccuracyError(TcfouError, ArithmeticError):
    """A numerical routine could not reach the requested accuracy.

    The best estimate obtained so far is kept on ``estimate`` together with
    the error estimate ``error`` so callers may decide to use it anyway.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class HorizonError(TcfouError, ValueError):
    """A simulated path does not reach far enough in time.

    ``required`` carries the horizon that would have been needed.
    """

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class NumericError(TcfouError, ArithmeticError):
    """A linear-algebra or FFT step failed (e.g. no valid factorisation)."""


class ResourceError(TcfouError, RuntimeError):
    """A request would exceed a configured size limit."""
