"""Exception hierarchy shared by every module.

All domain errors derive from :class:`NcHeightError`; the command line maps
them to exit code 1 and prints the class name on stderr.
"""


class NcHeightError(Exception):
    """Base class for domain errors."""


class DivisionByZero(NcHeightError, ZeroDivisionError):
    pass


class FieldMismatch(NcHeightError):
    pass


class PrecisionFailure(NcHeightError):
    pass


class Unsupported(NcHeightError):
    pass


class InvalidInput(NcHeightError, ValueError):
    pass


class NumericalFailure(NcHeightError):
    pass


class ConstraintViolation(NcHeightError):
    pass


class BudgetExceeded(NcHeightError):
    """Raised when an enumeration exceeds its budget.

    ``partial`` carries whatever was found before the cut-off.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial if partial is not None else []


class NotPositiveDefinite(NcHeightError):
    pass


class FieldError(NcHeightError):
    pass


class NotFullLattice(NcHeightError):
    pass


class InvalidScaling(NcHeightError):
    pass


class NotIdempotent(NcHeightError):
    pass


class NotInvertible(NcHeightError):
    pass


class NotPositive(NcHeightError):
    pass


class CompositionError(NcHeightError):
    pass


class PositivityViolation(NcHeightError):
    pass


class ZeroModule(NcHeightError):
    pass


class NotReconstructing(NcHeightError):
    pass


class InvalidTwoCategory(NcHeightError):
    pass


class ModeError(NcHeightError):
    pass
