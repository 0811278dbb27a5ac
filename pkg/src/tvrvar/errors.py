"""Exception hierarchy.

The CLI maps each family onto an exit code: parameter problems to 2,
data/format problems to 3, numerical failures to 4.
"""


class TvvarError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(TvvarError, ValueError):
    """An argument is out of range or dimensions do not agree."""


class SizeError(ParameterError):
    """A dense construction would exceed the configured memory cap."""


class DataError(TvvarError, ValueError):
    """Input data is unusable (non-finite entries, wrong shape)."""


class FormatError(DataError):
    """A file does not follow the expected layout."""


class ParseError(FormatError):
    """A cell could not be parsed as a number."""

    def __init__(self, row, col, text):
        self.row, self.col, self.text = row, col, text
        super().__init__(f"cannot parse {text!r} as a number at row {row}, column {col}")


class NumericalError(TvvarError, ArithmeticError):
    """A numerical routine failed. ``report`` may carry a partial fit report."""

    report = None


class SingularityError(NumericalError):
    """A factorization failed because the system is numerically singular."""


class BreakdownError(NumericalError):
    """Conjugate gradient hit a zero (or negative) curvature direction."""


class RankError(NumericalError):
    """A truncation rank hits a zero singular value."""


class GenerationError(NumericalError):
    """A synthetic generator could not satisfy its constraints."""
