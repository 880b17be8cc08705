"""Exception hierarchy shared by every module."""


class SepSteinError(Exception):
    """Base class for all library errors."""


class ShapeError(SepSteinError, ValueError):
    """Matrix dimensions do not match the declared bipartition."""


class DomainError(SepSteinError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class SizeError(SepSteinError, ValueError):
    """A matrix would exceed the configured dimension cap."""


class NumericError(SepSteinError, ArithmeticError):
    """A numerical routine failed (solver breakdown, non-convergence)."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ConsistencyError(SepSteinError, RuntimeError):
    """A constructed object failed its own verification check."""
