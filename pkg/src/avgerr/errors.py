"""Exception types shared across the package."""


class AvgErrError(Exception):
    """Base class for all package errors."""


class InvalidInputError(AvgErrError, ValueError):
    """Input data or parameters violate a documented precondition."""


class DegenerateVarianceError(InvalidInputError):
    """The series has zero variance, so a normalised quantity is undefined."""


class NumericalError(AvgErrError, ArithmeticError):
    """A numerical procedure failed (non-convergence, blow-up, singular system)."""


class FitError(NumericalError):
    """The constrained fit found no feasible point.

    Attributes
    ----------
    best_iterate : object
        The best (possibly infeasible) parameters seen, or None.
    """

    def __init__(self, message, best_iterate=None):
        super().__init__(message)
        self.best_iterate = best_iterate


class BlowUpError(NumericalError):
    """A time integration produced non-finite values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
