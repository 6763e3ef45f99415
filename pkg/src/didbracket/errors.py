"""Exception hierarchy.

Three broad classes map onto CLI exit codes: ConfigError -> 2,
DataError -> 3, InvariantError -> 4. Everything raised by the library
derives from DidBracketError so callers can catch one base type.
"""

from __future__ import annotations


class DidBracketError(Exception):
    """Base class for all errors raised by this package."""

    @property
    def code(self) -> str:
        name = type(self).__name__
        return name[:-5] if name.endswith("Error") else name


class ConfigError(DidBracketError):
    """Bad configuration: unknown keys, unparsable values, inconsistent flags."""


class DataError(DidBracketError):
    """Problem with input data or with arguments derived from it."""


class InvariantError(DidBracketError):
    """An internal consistency check failed; indicates a bug, not bad input."""


class MissingDataError(DataError):
    """A required (unit, year) observation is absent from the panel."""

    def __init__(self, missing):
        self.missing = tuple(sorted(missing))
        pairs = ", ".join(f"{u}:{y}" for u, y in self.missing[:8])
        more = "" if len(self.missing) <= 8 else f" (+{len(self.missing) - 8} more)"
        super().__init__(f"missing unit-years: {pairs}{more}")


class MissingSEError(DataError):
    """A standard error is required but absent."""


class EmptyGroupError(DataError):
    """A group of units that must be nonempty is empty."""


class EmptyBracketError(DataError):
    """Pre-study classification left one side of the bracket empty."""

    def __init__(self, side: str):
        self.side = side
        super().__init__(f"no {side} control candidates; bracketing impossible")


class NonpositiveDenominatorError(DataError):
    """Percent-change denominator is zero or negative."""


class LevelMismatchError(DataError):
    """Confidence intervals combined at different confidence levels."""


class ArmUnavailableError(DataError):
    """Requested placebo arm is absent for the requested unit."""


class BadSplitError(DataError):
    """Split year does not fall strictly inside the period being split."""


class OutOfDomainError(DataError):
    """Numeric argument outside the mathematical domain of the operation."""


class InvalidScenarioError(DataError):
    """Simulation scenario violates a structural requirement."""


class ParseError(DataError):
    """Malformed row in an input file."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class SchemaError(DataError):
    """Input file header does not match the documented schema."""
