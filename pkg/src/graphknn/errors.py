"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 2, audit/invariant
failures exit 1, I/O and format problems exit 3.
"""


class GraphknnError(Exception):
    pass


class UsageError(GraphknnError, ValueError):
    """Caller violated an operation's precondition."""


class DomainError(GraphknnError, ValueError):
    """Input is structurally valid but mathematically unusable."""


class FormatError(GraphknnError, ValueError):
    """A binary or text artifact does not match its documented layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class AuditError(GraphknnError, AssertionError):
    """A structural invariant of a built artifact does not hold."""
