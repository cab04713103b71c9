"""
Exception hierarchy for the straightening toolkit.

Every error raised on purpose derives from StraightkitError. The three
families map onto the command-line exit codes.
"""


class StraightkitError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


class ConfigError(StraightkitError):
    """Bad flags, unknown config keys, type mismatches"""

    exit_code = 2


class InvalidArgumentError(StraightkitError, ValueError):
    """A plain argument violates a precondition (even window, points < 2, ...)"""

    exit_code = 2


class DataError(StraightkitError):
    """The input data cannot be processed"""

    exit_code = 3


class ImageIOError(DataError):
    pass


class CanvasError(DataError):
    pass


class NoForegroundError(DataError):
    def __init__(self, message="no foreground"):
        super().__init__(message)


class AxisTooShortError(DataError):
    pass


class OutOfCanvasError(DataError):
    pass


class ResolutionMismatchError(DataError):
    pass


class NoSignificantBendError(DataError):
    def __init__(self, message="no significant bend"):
        super().__init__(message)


class StitchError(DataError):
    pass


class ProfileError(DataError):
    pass


class DatasetError(DataError):
    pass


class TrainingAborted(StraightkitError):
    """Training hit a non-finite loss or an empty split"""

    exit_code = 4
