"""
Exception hierarchy for the MEMD engine.

Every error raised on purpose by the package derives from MemdError so callers
(CLI, HTTP API) can map the whole family to exit codes or status codes.
"""

from typing import Optional


class MemdError(Exception):
    """Base class for all engine errors."""


class ConfigError(MemdError, ValueError):
    """Invalid run or sift configuration."""


class DomainError(MemdError, ValueError):
    """Operand outside the mathematical domain of an operation (e.g. division by <= 0)."""


class TableMiss(MemdError):
    """Denominator outside the reciprocal table range."""


class TooShort(MemdError, ValueError):
    """Sequence shorter than the operation needs."""


class TooFewKnots(MemdError, ValueError):
    """Not enough knots to build an interpolant."""


class NonMonotonicKnots(MemdError, ValueError):
    """Knot abscissae are not strictly increasing."""


class SingularSystem(MemdError, ArithmeticError):
    """Zero (or vanishing) pivot during the Thomas sweep."""


class OutOfRange(MemdError, ValueError):
    """Query point outside the knot span."""


class TooFewExtrema(MemdError):
    """A projection carries too few extrema to build an envelope."""


class ResidueReached(MemdError):
    """The signal has become a residue: some projection has no usable envelope."""


class DimensionMismatch(MemdError, ValueError):
    """Channel counts of signal and direction set differ."""


class Flushed(MemdError, RuntimeError):
    """Push attempted on a stream that was already flushed."""


class ParseError(MemdError, ValueError):
    """Malformed input file."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class RaggedRows(ParseError):
    """Rows of an input file have differing field counts."""


class NyquistViolation(MemdError, ValueError):
    """A requested tone is at or above half the sample rate."""


class DegenerateInput(MemdError, ValueError):
    """Input without variance where a statistic needs some."""
