"""Shared exception types.

Every error raised by this package derives from ForeseeError so callers can
catch the whole family; the subclasses distinguish the failure classes the
CLI maps to distinct exit codes.
"""


class ForeseeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidRangeError(ForeseeError, ValueError):
    """A numeric precondition (range, count, positivity) was violated."""


class ShapeMismatchError(ForeseeError, ValueError):
    """Two arrays that must agree in shape do not."""


class EmptyRegionError(ForeseeError, ValueError):
    """A requested region (foreground/background/valid set) has no pixels."""


class ParseError(ForeseeError, ValueError):
    """Malformed text or binary input; carries location context."""

    def __init__(self, message: str, *, source: str | None = None, line: int | None = None):
        loc = ""
        if source is not None:
            loc += source
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.source = source
        self.line = line


class MissingSampleError(ForeseeError, ValueError):
    """A dataset directory is missing files for one or more sample ids."""

    def __init__(self, message: str, ids: list[str] | None = None):
        super().__init__(message)
        self.ids = ids or []


class DivergenceError(ForeseeError, RuntimeError):
    """Training produced a non-finite loss (learning rate too high)."""
