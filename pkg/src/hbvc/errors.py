"""Exception hierarchy shared by all hbvc modules."""


class HbvcError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InvalidInputError(HbvcError, ValueError):
    exit_code = 2


class UnsupportedFormatError(HbvcError, ValueError):
    exit_code = 4


class TruncatedInputError(HbvcError, IOError):
    exit_code = 3


class InconsistentInputError(HbvcError, ValueError):
    exit_code = 2


class InvalidGopError(HbvcError, ValueError):
    exit_code = 5


class ScheduleAlignmentError(HbvcError, ValueError):
    exit_code = 5


class ScheduleViolationError(HbvcError, RuntimeError):
    exit_code = 5


class InvalidGainError(HbvcError, ValueError):
    exit_code = 5


class MissingLevelError(HbvcError, KeyError):
    exit_code = 5


class UnderdeterminedFitError(HbvcError, ValueError):
    exit_code = 5


class InsufficientDataError(HbvcError, ValueError):
    exit_code = 5


class BitstreamFormatError(HbvcError, ValueError):
    exit_code = 4


class BitstreamCorruptionError(HbvcError, ValueError):
    """Raised when a payload cannot be decoded.

    ``frames`` holds whatever was decoded before the failure (display index ->
    Frame) and ``last_good`` the highest display index among them, or -1.
    """

    exit_code = 4

    def __init__(self, msg, frames=None, last_good=-1, missing=()):
        super().__init__(msg)
        self.frames = frames or {}
        self.last_good = last_good
        self.missing = tuple(missing)


class NoOverlapError(HbvcError, ValueError):
    exit_code = 2


class InvalidPairingError(HbvcError, ValueError):
    exit_code = 2
