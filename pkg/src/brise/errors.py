"""Exception hierarchy with stable machine-readable codes.

Every error raised by the library carries a ``code`` attribute that is kept
stable across releases; the CLI serializes it into the error JSON so scripts
can branch on it without parsing messages.
"""

from __future__ import annotations

__all__ = [
    "BriseError",
    "SchemaMismatchError",
    "PartialBlockError",
    "AllMissingRowError",
    "NonNumericValueError",
    "EmptyAfterFilterError",
    "GroupVanishedError",
    "InvalidKError",
    "EmptyCandidatesError",
    "DegeneratePatternError",
    "InsufficientPatternSizeError",
    "TooLargeError",
    "SingularCovarianceError",
    "NumericOverflowError",
    "InvalidConfigError",
]


class BriseError(Exception):
    """Base class; ``code`` is the stable identifier surfaced by the CLI."""

    code = "Error"

    def to_json_dict(self) -> dict:
        return {"code": self.code, "message": str(self)}


class SchemaMismatchError(BriseError):
    code = "SchemaMismatch"


class PartialBlockError(BriseError):
    """A source block with some-but-not-all entries missing in one row.

    Entry-wise missingness is outside the model; rejecting it loudly beats
    silently coercing the row to a pattern it does not belong to.
    """

    code = "PartialBlock"


class AllMissingRowError(BriseError):
    code = "AllMissingRow"


class NonNumericValueError(BriseError):
    code = "NonNumericValue"


class EmptyAfterFilterError(BriseError):
    code = "EmptyAfterFilter"


class GroupVanishedError(BriseError):
    code = "GroupVanished"


class InvalidKError(BriseError):
    code = "InvalidK"


class EmptyCandidatesError(BriseError):
    code = "EmptyCandidates"


class DegeneratePatternError(BriseError):
    code = "DegeneratePattern"


class InsufficientPatternSizeError(BriseError):
    code = "InsufficientPatternSize"


class TooLargeError(BriseError):
    code = "TooLarge"


class SingularCovarianceError(BriseError):
    code = "SingularCovariance"


class NumericOverflowError(BriseError):
    code = "NumericOverflow"


class InvalidConfigError(BriseError):
    code = "InvalidConfig"
