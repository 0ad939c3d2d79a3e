"""Exception types shared across the toolkit."""


class XVerifyError(Exception):
    """Base class for all xverify errors."""


class InvalidParameterError(XVerifyError, ValueError):
    """A parameter or argument is outside its documented range or malformed."""


class DegenerateImageError(XVerifyError):
    """An image carries no usable signal (e.g. constant after centering)."""


class BackendError(XVerifyError):
    """An embedding backend failed to produce feature vectors."""


class DegenerateSplitError(XVerifyError):
    """A cross-validation training split contains only one label."""


class InsufficientDataError(XVerifyError):
    """Too few usable data points to fit a model."""


class PairsFormatError(XVerifyError):
    """A pairs CSV file is malformed.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NotFoundError(XVerifyError, KeyError):
    """A requested record or artifact does not exist."""

    def __str__(self):
        # KeyError would repr() the message; keep it readable.
        return Exception.__str__(self)


class StoreLockedError(XVerifyError):
    """Another batch writer holds the store lock."""
