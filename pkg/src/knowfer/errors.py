"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage errors exit 1, I/O
errors 2, file format/corruption errors 3, dimension mismatches 4.
"""


class KnowferError(Exception):
    """Base class for all package errors."""


class UsageError(KnowferError):
    """Invalid parameter or configuration value."""


class ParameterError(UsageError):
    """A numeric argument is out of its legal range."""


class EmptyLibraryError(UsageError):
    """An operation that needs records was given none."""


class LibraryLookupError(UsageError):
    """A named library does not exist in the collection."""


class UnsupportedWindowError(UsageError):
    """Window shape not supported by the wavelet transform."""


class DimensionError(KnowferError):
    """Shapes, lengths, or channel counts do not agree."""


class CoverageError(KnowferError):
    """Patch set leaves part of the target map uncovered."""

    def __init__(self, y: int, x: int):
        self.y = y
        self.x = x
        super().__init__(f"no patch covers cell (y={y}, x={x})")


class FormatError(KnowferError):
    """A serialized file is malformed.

    Carries the byte offset at which decoding failed.
    """

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


class CorruptionError(FormatError):
    """Two artifacts that must belong together do not match."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message, offset)
