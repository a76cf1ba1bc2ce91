"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: data problems exit with 2, numerical
failures with 3. Plain ``ValueError`` is used for bad arguments.
"""


class FeatvecError(Exception):
    """Base class for all package errors."""


class DataError(FeatvecError):
    """Input data is unusable as given (missing values, too few rows, ...)."""


class SchemaError(DataError):
    """Schema and data disagree: missing, unknown or duplicated names."""


class DataParseError(DataError):
    """A cell could not be parsed as a number."""

    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")


class UnsplittableDataError(DataError):
    """Too many consecutive trees without a single split."""


class NumericalError(FeatvecError):
    """A numerical routine failed (non-PD matrix, non-finite likelihood, ...)."""


class DegenerateMatrixError(NumericalError):
    """The co-occurrence matrix is identically zero."""


class UndefinedAngleError(ValueError):
    """The angle of a zero vector was requested."""


class UndefinedCorrelationError(ValueError):
    """A rank correlation was requested for a constant score vector."""
