"""Exception hierarchy shared by every dendrostat module."""


class DendroError(Exception):
    """Base class for all errors raised by dendrostat."""


class ValidationError(DendroError, ValueError):
    """Input failed a precondition check."""


class ParseError(ValidationError):
    """Malformed ring-width file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(ValidationError):
    """A value lies outside the domain of an operation."""


class GapError(ParseError):
    """A ring-width column has missing values inside its span."""

    def __init__(self, sample_id, year, line=None):
        super().__init__(f"series {sample_id!r} has an interior gap at year {year}", line)
        self.sample_id = sample_id
        self.year = year


class AlignmentError(ValidationError):
    """Series spans share no common interval."""


class LengthError(ValidationError):
    """A sequence is too short for the requested operation."""


class RankError(ValidationError):
    """Design matrix is rank deficient."""


class FitError(DendroError):
    """An optimizer failed; ``best`` carries the best iterate found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class UnavailableError(DendroError):
    """A quantity was requested that the fit could not provide."""


class BenchmarkError(DendroError):
    """A regressor failed while being cross-validated."""
