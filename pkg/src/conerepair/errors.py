"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ConeRepairError(Exception):
    """Base class for all errors raised by conerepair."""


class InvalidArgumentError(ConeRepairError, ValueError):
    """Structurally invalid input: dimension mismatch, bad cone, etc."""


class NumericalError(ConeRepairError, ArithmeticError):
    """Solver iterates became non-finite.

    ``diagnostics`` holds whatever the solver knew at the point of failure.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class DegenerateGradientError(ConeRepairError):
    """The embedding residual is (numerically) zero, so its gradient is undefined."""


class UnsupportedCompositionError(ConeRepairError):
    """No closed-form proximal operator is registered for a regularizer tree."""


class UnsupportedProblemError(ConeRepairError):
    """The problem does not satisfy the preconditions of the requested method."""


class EpsilonInfeasibleError(ConeRepairError):
    """The interior-shrunk convex repair problem has no feasible point."""


class ParseError(ConeRepairError):
    """Malformed problem file; carries the 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = ""):
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}")
