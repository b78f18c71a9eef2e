"""Exception hierarchy.

Argument problems subclass ``ValueError`` so callers that only know the
standard library still catch them.
"""


class GcscError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(GcscError, ValueError):
    """An argument is out of range or inconsistent with another one."""


class FormatError(GcscError):
    """A file does not match the declared on-disk format."""


class DataError(GcscError, ValueError):
    """Input values are unusable (non-finite, malformed rows, ...)."""


class DegenerateDataError(DataError):
    """Data carries no usable signal, e.g. zero variance or an all-zero matrix."""


class StateError(GcscError):
    """An operation needs information the object does not carry."""


class NumericalError(GcscError, ArithmeticError):
    """A numerical routine failed or produced non-finite output."""


class StageError(GcscError):
    """Wraps an error raised inside a pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
