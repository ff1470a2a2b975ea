"""
Q16.8 saturating fixed-point arithmetic.

Values travel as raw two's-complement integers (value = raw / 2^8) held in Python
ints or numpy int64 arrays; the logical width is 24 bits. Every function accepts
either form and returns the same form it was given.

Rounding is round-to-nearest-even on quantisation and on every right shift.
Saturation is silent but recorded on an ArithmeticContext, whose ``overflow``
flag is sticky for the lifetime of a decomposition.

Inside a decomposition the sifting state is kept in a guarded format with
GUARD_BITS extra fraction bits over the same value range; IMFs and residues
leave it through ``narrow``.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .errors import DomainError, TableMiss

logger = logging.getLogger(__name__)

FRAC_BITS = 8
SCALE = 1 << FRAC_BITS
RAW_MIN = -(1 << 23)
RAW_MAX = (1 << 23) - 1

# Wide internal accumulator: ratios and CSD constants keep 24 fraction bits.
WIDE_FRAC_BITS = 24
WIDE_ONE = 1 << WIDE_FRAC_BITS

# Sifting state between input and output: Q16.8 plus GUARD_BITS fraction bits.
GUARD_BITS = 8
GUARDED_MIN = RAW_MIN << GUARD_BITS
GUARDED_MAX = (RAW_MAX << GUARD_BITS) | ((1 << GUARD_BITS) - 1)

# Reciprocal table covers denominators [1 LSB, 256.0].
LUT_MAX_RAW = 256 * SCALE
RECIP_FRAC_BITS = 30

RawLike = Union[int, np.ndarray]


@dataclass
class ArithmeticContext:
    """
    Per-decomposition arithmetic state.

    Must not be shared between concurrent decompositions.
    """

    overflow: bool = False
    saturations: int = 0
    table_misses: int = 0
    fallback_divisions: int = 0

    def note_saturation(self, count: int) -> None:
        if count:
            self.saturations += int(count)
            if not self.overflow:
                logger.debug("Q16.8 saturation (%d values)", count)
            self.overflow = True

    def note_table_miss(self, count: int) -> None:
        if count:
            self.table_misses += int(count)
            self.fallback_divisions += int(count)

    def reset(self) -> None:
        self.overflow = False
        self.saturations = 0
        self.table_misses = 0
        self.fallback_divisions = 0

    def snapshot(self) -> Dict[str, Any]:
        return {
            "overflow": self.overflow,
            "saturations": self.saturations,
            "table_misses": self.table_misses,
            "fallback_divisions": self.fallback_divisions,
        }


def _wrap(result: np.ndarray, scalar: bool) -> RawLike:
    return int(result) if scalar else result


def _raw_array(v: RawLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(v, dtype=np.int64)
    return arr, arr.ndim == 0


def shift_round(v: RawLike, shift: int) -> RawLike:
    """Arithmetic right shift with round-half-even. No saturation."""
    arr, scalar = _raw_array(v)
    if shift <= 0:
        return _wrap(arr << -shift, scalar)
    q = arr >> shift
    r = arr - (q << shift)
    half = 1 << (shift - 1)
    q = q + ((r > half) | ((r == half) & ((q & 1) == 1)))
    return _wrap(q, scalar)


def div_round(num: RawLike, den: RawLike) -> RawLike:
    """Exact integer division num/den (den > 0) rounded half-even."""
    n, scalar = _raw_array(num)
    d = np.asarray(den, dtype=np.int64)
    q = np.floor_divide(n, d)
    twice = 2 * (n - q * d)
    q = q + ((twice > d) | ((twice == d) & ((q & 1) == 1)))
    return _wrap(q, scalar and d.ndim == 0)


def saturate(v: RawLike, ctx: Optional[ArithmeticContext] = None) -> RawLike:
    arr, scalar = _raw_array(v)
    clipped = np.clip(arr, RAW_MIN, RAW_MAX)
    if ctx is not None:
        ctx.note_saturation(np.count_nonzero(clipped != arr))
    return _wrap(clipped, scalar)


def from_real(v: Union[float, np.ndarray], ctx: Optional[ArithmeticContext] = None) -> RawLike:
    """Quantise real values to Q16.8 raw integers (round-half-even, saturating)."""
    x = np.asarray(v, dtype=float)
    if np.isnan(x).any():
        raise DomainError("cannot quantise NaN")
    scaled = np.rint(x * SCALE)
    clipped = np.clip(scaled, RAW_MIN, RAW_MAX)
    if ctx is not None:
        ctx.note_saturation(np.count_nonzero(clipped != scaled))
    return _wrap(clipped.astype(np.int64), x.ndim == 0)


def to_real(raw: RawLike) -> Union[float, np.ndarray]:
    arr = np.asarray(raw, dtype=np.int64)
    out = arr.astype(float) / SCALE
    return float(out) if arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Guarded working format
# ---------------------------------------------------------------------------

def widen(raw: RawLike) -> RawLike:
    """Q16.8 raw -> guarded raw (GUARD_BITS more fraction bits). Exact."""
    arr, scalar = _raw_array(raw)
    return _wrap(arr << GUARD_BITS, scalar)


def saturate_guarded(v: RawLike, ctx: Optional[ArithmeticContext] = None) -> RawLike:
    """Clip guarded raws to the Q16.8 value range."""
    arr, scalar = _raw_array(v)
    clipped = np.clip(arr, GUARDED_MIN, GUARDED_MAX)
    if ctx is not None:
        ctx.note_saturation(np.count_nonzero(clipped != arr))
    return _wrap(clipped, scalar)


def narrow(guarded: RawLike, ctx: Optional[ArithmeticContext] = None) -> RawLike:
    """Guarded raw -> Q16.8 raw, rounded half-even and saturated."""
    return saturate(shift_round(guarded, GUARD_BITS), ctx)


def add(a: RawLike, b: RawLike, ctx: Optional[ArithmeticContext] = None) -> RawLike:
    a_arr, a_scalar = _raw_array(a)
    b_arr, b_scalar = _raw_array(b)
    return _wrap(saturate(a_arr + b_arr, ctx), a_scalar and b_scalar)


def sub(a: RawLike, b: RawLike, ctx: Optional[ArithmeticContext] = None) -> RawLike:
    a_arr, a_scalar = _raw_array(a)
    b_arr, b_scalar = _raw_array(b)
    return _wrap(saturate(a_arr - b_arr, ctx), a_scalar and b_scalar)


def mul(a: RawLike, b: RawLike, ctx: Optional[ArithmeticContext] = None) -> RawLike:
    """Full-width product, shift right by 8 with rounding, then saturate."""
    a_arr, a_scalar = _raw_array(a)
    b_arr, b_scalar = _raw_array(b)
    product = shift_round(a_arr * b_arr, FRAC_BITS)
    return _wrap(saturate(product, ctx), a_scalar and b_scalar)


# ---------------------------------------------------------------------------
# Canonical signed digit constants
# ---------------------------------------------------------------------------

def csd_digits(n: int) -> Tuple[int, ...]:
    """Non-adjacent-form digits of n, least significant first, each in {-1, 0, 1}."""
    digits = []
    while n != 0:
        if n & 1:
            d = 2 - (n % 4)
            n -= d
        else:
            d = 0
        digits.append(d)
        n //= 2
    return tuple(digits)


@dataclass(frozen=True)
class CsdConstant:
    """
    A real constant encoded as signed powers of two.

    ``terms`` holds (sign, shift) pairs, most significant first, so that
    value ~= sum(sign * 2**-shift). ``frac_bits`` is the precision the constant
    was quantised to; 8 reproduces ``from_real`` exactly.
    """

    value: float
    terms: Tuple[Tuple[int, int], ...]
    frac_bits: int = WIDE_FRAC_BITS

    @classmethod
    def from_real(cls, value: float, frac_bits: int = WIDE_FRAC_BITS) -> "CsdConstant":
        n = int(round(value * (1 << frac_bits)))
        digits = csd_digits(n)
        terms = tuple(
            (d, frac_bits - position)
            for position, d in reversed(list(enumerate(digits)))
            if d != 0
        )
        return cls(value=float(value), terms=terms, frac_bits=frac_bits)

    @property
    def raw(self) -> int:
        """Integer numerator over 2**frac_bits represented by the terms."""
        return sum(sign << (self.frac_bits - shift) for sign, shift in self.terms)

    def reconstruct(self) -> float:
        return sum(sign * 2.0 ** (-shift) for sign, shift in self.terms)


def csd_accumulate(a: RawLike, c: CsdConstant) -> RawLike:
    """Shift-and-add product a*c kept in the wide accumulator (8 + c.frac_bits fraction bits)."""
    arr, scalar = _raw_array(a)
    acc = np.zeros_like(arr)
    for sign, shift in c.terms:
        acc = acc + sign * (arr << (c.frac_bits - shift))
    return _wrap(acc, scalar)


def csd_mul(a: RawLike, c: CsdConstant, ctx: Optional[ArithmeticContext] = None) -> RawLike:
    """Constant multiplication by shifts and additions, rounded once then saturated."""
    return saturate(shift_round(csd_accumulate(a, c), c.frac_bits), ctx)


# ---------------------------------------------------------------------------
# Reciprocal lookup table
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def reciprocal_table() -> np.ndarray:
    """round(2^(8+30) / d) for every raw denominator d in [1, LUT_MAX_RAW]; entry 0 unused."""
    dens = np.arange(1, LUT_MAX_RAW + 1, dtype=np.int64)
    table = np.zeros(LUT_MAX_RAW + 1, dtype=np.int64)
    table[1:] = div_round(np.int64(1) << (FRAC_BITS + RECIP_FRAC_BITS), dens)
    table.setflags(write=False)
    return table


def div_lut(
    num: RawLike,
    den: RawLike,
    ctx: Optional[ArithmeticContext] = None,
    strict: bool = False,
) -> RawLike:
    """
    num / den through the reciprocal table.

    Raises:
        DomainError: if any denominator is <= 0.
        TableMiss: if ``strict`` and a denominator exceeds the table; otherwise
            those entries fall back to exact division and are counted on ``ctx``.
    """
    n, n_scalar = _raw_array(num)
    d, d_scalar = _raw_array(den)
    if np.any(d <= 0):
        raise DomainError("div_lut denominator must be positive")
    n, d = np.broadcast_arrays(n, d)
    miss = d > LUT_MAX_RAW
    misses = int(np.count_nonzero(miss))
    if misses and strict:
        raise TableMiss(f"{misses} denominator(s) beyond {LUT_MAX_RAW / SCALE:g}")

    table = reciprocal_table()
    recip = table[np.where(miss, 1, d)]
    out = shift_round(n * recip, RECIP_FRAC_BITS)
    if misses:
        out = np.where(miss, div_round(n << FRAC_BITS, np.where(miss, d, 1)), out)
        if ctx is not None:
            ctx.note_table_miss(misses)
    return _wrap(saturate(out, ctx), n_scalar and d_scalar)


def ratio(
    num: RawLike,
    den: RawLike,
    ctx: Optional[ArithmeticContext] = None,
) -> RawLike:
    """
    Integer ratio num/den (den >= 1, e.g. sample spacings) as a wide value with
    WIDE_FRAC_BITS fraction bits, via the same reciprocal table as div_lut.
    """
    n, n_scalar = _raw_array(num)
    d, d_scalar = _raw_array(den)
    if np.any(d <= 0):
        raise DomainError("ratio denominator must be positive")
    n, d = np.broadcast_arrays(n, d)
    den_raw = d << FRAC_BITS
    miss = den_raw > LUT_MAX_RAW
    table = reciprocal_table()
    recip = table[np.where(miss, 1, den_raw)]
    out = shift_round(n * recip, RECIP_FRAC_BITS - WIDE_FRAC_BITS)
    misses = int(np.count_nonzero(miss))
    if misses:
        out = np.where(miss, div_round(n << WIDE_FRAC_BITS, np.where(miss, d, 1)), out)
        if ctx is not None:
            ctx.note_table_miss(misses)
    return _wrap(out, n_scalar and d_scalar)


@dataclass(frozen=True)
class FixedQ16_8:
    """
    Scalar Q16.8 value.

    A value created with ``ctx`` passes it on to the results of its operators,
    so saturations in expressions such as ``a + b`` are recorded there. The
    context of the left operand wins; the right operand's is used when the left
    has none.
    """

    raw: int = field(default=0)
    ctx: Optional[ArithmeticContext] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not RAW_MIN <= int(self.raw) <= RAW_MAX:
            raise DomainError(f"raw {self.raw} outside 24-bit Q16.8 range")

    @classmethod
    def from_real(cls, v: float, ctx: Optional[ArithmeticContext] = None) -> "FixedQ16_8":
        return cls(from_real(v, ctx), ctx)

    @property
    def value(self) -> float:
        return self.raw / SCALE

    def _context(self, other: "FixedQ16_8") -> Optional[ArithmeticContext]:
        return self.ctx if self.ctx is not None else other.ctx

    def __add__(self, other: "FixedQ16_8") -> "FixedQ16_8":
        ctx = self._context(other)
        return FixedQ16_8(add(self.raw, other.raw, ctx), ctx)

    def __sub__(self, other: "FixedQ16_8") -> "FixedQ16_8":
        ctx = self._context(other)
        return FixedQ16_8(sub(self.raw, other.raw, ctx), ctx)

    def __mul__(self, other: "FixedQ16_8") -> "FixedQ16_8":
        ctx = self._context(other)
        return FixedQ16_8(mul(self.raw, other.raw, ctx), ctx)

    def __truediv__(self, other: "FixedQ16_8") -> "FixedQ16_8":
        ctx = self._context(other)
        return FixedQ16_8(div_lut(self.raw, other.raw, ctx), ctx)

    def __float__(self) -> float:
        return self.value
