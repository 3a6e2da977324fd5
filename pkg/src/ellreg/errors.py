"""Exception hierarchy shared by every module of the toolkit."""


class EllregError(Exception):
    """Base class for all toolkit errors."""


class NonConvergence(EllregError, ArithmeticError):
    pass


class DomainError(EllregError, ValueError):
    pass


class PrecisionTooLow(EllregError):
    pass


class RamifiedPrime(EllregError, ValueError):
    pass


class BadReduction(EllregError, ValueError):
    pass


class BoundExceeded(EllregError, ValueError):
    pass


class NotOnCurve(EllregError, ValueError):
    pass


class PoleAtLattice(EllregError, ZeroDivisionError):
    pass


class DegreeNonZero(EllregError, ValueError):
    pass


class AbelConditionFailed(EllregError, ValueError):
    pass


class ConjugationMismatch(EllregError, ValueError):
    pass


class NotCalibrated(EllregError):
    pass


class CalibrationFailed(EllregError):
    pass


class DivisionByNearZero(EllregError, ZeroDivisionError):
    pass


class JobError(EllregError):
    """Malformed job input; carries an optional (line, column) position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)
