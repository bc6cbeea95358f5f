"""Custom exception classes for undernewton.

Algorithmic failures of the Newton solvers are reported through
``SolveOutcome.status``; the exceptions below cover invalid input and
failures of the lower-level building blocks.
"""


class UnderNewtonError(Exception):
    """Base exception for all undernewton errors."""
    pass


class RankDeficientError(UnderNewtonError):
    """Raised when a matrix fails the full-rank tolerance check."""
    pass


class LPInfeasibleError(UnderNewtonError):
    """Raised when phase 1 of the simplex method finds no feasible point."""
    pass


class LPUnboundedError(UnderNewtonError):
    """Raised when the linear program has no finite optimum."""
    pass


class CycleLimitError(UnderNewtonError):
    """Raised when the simplex iteration cap is hit."""
    pass


class SizeLimitError(UnderNewtonError):
    """Raised when the basis-enumeration oracle is asked for a large system."""
    pass


class DomainError(UnderNewtonError):
    """Raised when a closed-form bound is evaluated outside its domain."""
    pass


class ZeroGradientError(UnderNewtonError):
    """Raised when a scalar step meets a zero gradient with f(x) != 0."""
    pass


class ProblemFileError(UnderNewtonError):
    """Raised for malformed problem files; ``field`` names the offending key."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(message)
        self.field = field
