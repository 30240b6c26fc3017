"""Exception hierarchy shared by every module of the package."""


class CNcDirError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CNcDirError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class NonConvergence(CNcDirError, ArithmeticError):
    """An infinite series did not meet its tolerance within ``maxiter`` terms.

    ``level`` names the series that failed (e.g. ``"psi2_3/outer"``) and
    ``index`` the observation index when the failure happened inside a
    vectorised likelihood evaluation.
    """

    def __init__(self, message, level=None, index=None):
        super().__init__(message)
        self.level = level
        self.index = index


class MassZero(CNcDirError, ValueError):
    """A probability mass is structurally zero (log-probability is -inf)."""


class IterationCap(CNcDirError, RuntimeError):
    """Inverse-transform accumulation exceeded its configured term cap."""


class NoConvergence(CNcDirError, RuntimeError):
    """Every optimizer start failed to meet the convergence tolerance."""


class SingularInformation(CNcDirError, ArithmeticError):
    """The observed information matrix is not positive definite."""


class ParseError(CNcDirError, ValueError):
    """A data file could not be parsed; ``row`` is the 1-based line number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyAfterFilter(CNcDirError, ValueError):
    """No observation survived the ingestion filter."""
