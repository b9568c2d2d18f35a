"""Exception types shared across the package."""


class FvcError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(FvcError, ValueError):
    """A caller-supplied argument violates an operation's precondition."""


class FormatError(FvcError):
    """A file does not conform to its declared on-disk format.

    Messages name the first offending location: a byte offset for binary
    formats, a line number for text formats.
    """


class NotFittedError(FvcError, RuntimeError):
    """An estimator method requiring a fitted model was called before fit."""
