"""Exception types shared across the package.

Each class carries the process exit code the CLI maps it to, so error
handling stays in one place.
"""


class LabelSiftError(Exception):
    exit_code = 1


class InputError(LabelSiftError):
    """A file is missing, unreadable, or does not match its declared format."""

    exit_code = 3


class ValidationError(LabelSiftError):
    """Data or parameters violate an invariant."""

    exit_code = 4


class NotFoundError(LabelSiftError):
    """A requested id does not exist."""

    exit_code = 5


class EmptyResultError(LabelSiftError):
    """An operation would produce an empty artifact; refused."""

    exit_code = 6
