"""Exception types shared by all xrid modules.

Every domain failure raises a subclass of :class:`XridError` so callers
(and the CLI) can distinguish domain errors (exit 1) from usage errors
(exit 2, raised by argparse itself).
"""

from __future__ import annotations


class XridError(Exception):
    """Base class for all domain errors raised by this package."""


class ValidationError(XridError):
    """A domain type was constructed with a violated invariant.

    ``invariant`` names the failed invariant so tests and callers can
    assert on it without string-matching the human-readable message.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class DimMismatch(XridError):
    def __init__(self, found: int, expected: int, context: str = ""):
        msg = f"DimMismatch: found dimension {found}, expected {expected}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)
        self.found = found
        self.expected = expected


class FileMissing(XridError):
    def __init__(self, path):
        super().__init__(f"file not found: {path}")
        self.path = path


class FormatError(XridError):
    """Malformed feature/score file; carries the 1-based line (CSV) or
    byte offset (binary) where parsing failed when known."""

    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif offset is not None:
            where = f" (byte offset {offset})"
        super().__init__(message + where)
        self.line = line
        self.offset = offset


class NonFiniteValue(XridError):
    def __init__(self, row: int, col: int):
        super().__init__(f"non-finite value at row {row}, column {col}")
        self.row = row
        self.col = col


class IoError(XridError):
    pass


class SchemaError(XridError):
    pass


class CrossFileDimMismatch(XridError):
    def __init__(self, path, found: int, expected: int):
        super().__init__(f"{path}: dimension {found} does not match expected_dim {expected}")
        self.path = path
        self.found = found
        self.expected = expected


class NoSharedIdentities(XridError):
    pass


class SingleIdentity(XridError):
    pass


class EmptyInput(XridError):
    pass


class NotPositiveDefinite(XridError):
    def __init__(self, which: str):
        super().__init__(f"{which} is not positive definite after ridge addition")
        self.which = which


class EigenFailure(XridError):
    pass


class AlreadyNormalized(XridError):
    pass


class ProbeLabelAbsent(XridError):
    def __init__(self, label):
        super().__init__(f"probe label {label!r} never occurs in the gallery")
        self.label = label


class RankOutOfRange(XridError):
    pass


class TooFewIdentities(XridError):
    pass


class BadParams(XridError):
    pass
