"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`NudgeDAError`, so a
caller can catch the whole family at once.  Argument-shaped problems also derive
from :class:`ValueError`.
"""


class NudgeDAError(Exception):
    pass


class InvalidRangeError(NudgeDAError, ValueError):
    pass


class TooCoarseError(NudgeDAError, ValueError):
    pass


class GridMismatchError(NudgeDAError, ValueError):
    pass


class ZeroReferenceError(NudgeDAError, ZeroDivisionError):
    pass


class NonMonotoneTimeError(NudgeDAError, ValueError):
    pass


class EmptyBufferError(NudgeDAError, LookupError):
    pass


class InsufficientObservationsError(NudgeDAError, ValueError):
    pass


class DegenerateRowError(NudgeDAError, ArithmeticError):
    pass


class LengthMismatchError(NudgeDAError, ValueError):
    pass


class UnsupportedOrderError(NudgeDAError, ValueError):
    pass


class OutOfDomainError(NudgeDAError, ValueError):
    pass


class GridTooSmallError(NudgeDAError, ValueError):
    pass


class UnsupportedNError(NudgeDAError, ValueError):
    pass


class NonfiniteStateError(NudgeDAError, FloatingPointError):
    pass


class NonphysicalStateError(NudgeDAError, ValueError):
    pass


class CFLViolationError(NudgeDAError, ValueError):
    pass


class ShapeMismatchError(NudgeDAError, ValueError):
    pass


class MissingTraceError(NudgeDAError, LookupError):
    pass


class ConfigInvalidError(NudgeDAError, ValueError):
    pass


class MissingArtifactError(NudgeDAError, FileNotFoundError):
    pass
