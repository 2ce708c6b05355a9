"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class SvddError(Exception):
    """Base class for all library errors."""


class UsageError(SvddError, ValueError):
    """Invalid arguments: shape mismatch, out-of-range parameter, bad spec."""


class DataError(SvddError):
    """Input data cannot be used (parse failure, wrong dimension, bad model file)."""


class InsufficientDataError(DataError):
    """Fewer distinct rows than the operation needs."""


class DegenerateGeometryError(DataError):
    """A geometry generator could not satisfy its constraints."""


class NumericalError(SvddError, ArithmeticError):
    """A linear solve or search failed numerically."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class BracketError(NumericalError):
    """The bandwidth criterion peaks at the edge of the search range."""


class NonConvergence(SvddError):
    """The dual solver stopped before reaching the KKT tolerance."""

    def __init__(self, message, violation=float("nan"), passes=0):
        super().__init__(message)
        self.violation = violation
        self.passes = passes
