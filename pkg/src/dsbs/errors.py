"""Exception types raised across the package."""


class DsbsError(Exception):
    """Base class for all package errors."""


class InvalidArgument(DsbsError, ValueError):
    pass


class TerminalTimeError(InvalidArgument):
    """Drift queried at t >= 1, where the bridge kernel variance vanishes."""


class InvalidState(DsbsError, RuntimeError):
    pass


class NumericFailure(DsbsError, ArithmeticError):
    """A particle state became non-finite during integration."""

    def __init__(self, message, particle=None, step=None):
        super().__init__(message)
        self.particle = particle
        self.step = step


class DatasetFormatError(DsbsError, ValueError):
    """Malformed dataset file. ``offset`` is a line number (csv) or byte offset (f64le)."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset
