"""Exception types raised by the library.

All of them derive from ``ValueError`` so callers that only care about
"bad input" can catch a single class.
"""


class HDWNoiseError(ValueError):
    """Base class for library errors."""


class InvalidLagError(HDWNoiseError):
    pass


class DegenerateVarianceError(HDWNoiseError):
    pass


class SingularCovarianceError(HDWNoiseError):
    pass


class InfeasibleDimensionError(HDWNoiseError):
    pass


class InsufficientMomentsError(HDWNoiseError):
    pass


class NonstationaryError(HDWNoiseError):
    pass


class DomainError(HDWNoiseError):
    pass


class ParseError(HDWNoiseError):
    """Input file could not be parsed; carries the offending location."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column
