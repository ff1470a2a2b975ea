"""
Envelope interpolation.

Natural cubic splines solved with the Thomas algorithm (global mode), batched
three-knot natural splines behind interpolate_window, and piecewise-linear
interpolation for comparison runs.

Segment coefficients follow q_j(x) = a + b(x - x0) + c(x - x0)^2 + d(x - x0)^3 with
    b_j = (a_{j+1} - a_j)/h_j - h_j (2 c_j + c_{j+1}) / 3
    d_j = (c_{j+1} - c_j) / (3 h_j)
and c at both end knots held at zero.

The windowed evaluators use the equivalent normalised form
    q(u) = y0 + (y1 - y0) u + G_L (w^3 - w) + G_R (u^3 - u),  u = (x - x0)/h,  w = 1 - u
which keeps every fixed-point intermediate bounded by the knot amplitudes.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import fixed_point as fx
from .errors import NonMonotonicKnots, OutOfRange, SingularSystem, TooFewKnots

logger = logging.getLogger(__name__)

PIVOT_EPS = 1e-12

Query = Union[Tuple[int, int], Sequence[float], np.ndarray]


@dataclass(frozen=True)
class Knot:
    x: float
    y: float


@dataclass(frozen=True)
class SplineSegment:
    x0: float
    a: float
    b: float
    c: float
    d: float
    x1: float

    def __call__(self, x):
        dx = np.asarray(x, dtype=float) - self.x0
        return self.a + dx * (self.b + dx * (self.c + dx * self.d))


@dataclass(frozen=True)
class FixedSplineSegment:
    """Normalised cubic on [x0, x0 + h] with Q16.8 raw ordinate, rise and end weights."""

    x0: int
    h: int
    a: int
    delta: int
    g_left: int
    g_right: int

    @property
    def x1(self) -> int:
        return self.x0 + self.h

    def __call__(self, x, ctx: Optional[fx.ArithmeticContext] = None):
        u = fx.ratio(np.asarray(x, dtype=np.int64) - self.x0, self.h, ctx)
        return _normalised_fixed(self.a, self.delta, self.g_left, self.g_right, u, ctx)


@dataclass
class TridiagonalSystem:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=float)
        self.diag = np.asarray(self.diag, dtype=float)
        self.sup = np.asarray(self.sup, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = len(self.diag)
        if len(self.sub) != max(n - 1, 0) or len(self.sup) != max(n - 1, 0) or len(self.rhs) != n:
            raise ValueError("tridiagonal system diagonals have inconsistent lengths")

    @property
    def n(self) -> int:
        return len(self.diag)

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sub, -1) + np.diag(self.sup, 1)


def thomas_solve(system: TridiagonalSystem) -> np.ndarray:
    """
    Forward elimination then back substitution. ``rhs`` may be (n,) or (n, m);
    each column is solved against the same matrix.

    Raises:
        SingularSystem: if a pivot magnitude falls below 1e-12.
    """
    n = system.n
    if n == 0:
        return system.rhs.copy()
    diag, sub, sup = system.diag, system.sub, system.sup
    c_prime = np.zeros(n)
    d_prime = np.zeros_like(system.rhs)

    pivot = diag[0]
    if abs(pivot) < PIVOT_EPS:
        raise SingularSystem("zero pivot at row 0")
    c_prime[0] = sup[0] / pivot if n > 1 else 0.0
    d_prime[0] = system.rhs[0] / pivot
    for i in range(1, n):
        pivot = diag[i] - sub[i - 1] * c_prime[i - 1]
        if abs(pivot) < PIVOT_EPS:
            raise SingularSystem(f"zero pivot at row {i}")
        if i < n - 1:
            c_prime[i] = sup[i] / pivot
        d_prime[i] = (system.rhs[i] - sub[i - 1] * d_prime[i - 1]) / pivot

    x = np.empty_like(d_prime)
    x[-1] = d_prime[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d_prime[i] - c_prime[i] * x[i + 1]
    return x


def _check_knots(x: np.ndarray, minimum: int) -> None:
    if len(x) < minimum:
        raise TooFewKnots(f"need at least {minimum} knots, got {len(x)}")
    if np.any(np.diff(x) <= 0):
        raise NonMonotonicKnots("knot abscissae must be strictly increasing")


def natural_spline_arrays(x, y) -> Tuple[np.ndarray, ...]:
    """
    Natural spline coefficients for knots ``x`` and ordinates ``y`` of shape
    (n,) or (m, n) (one row per channel sharing the abscissae).

    Returns (a, b, c, d), each of shape (..., n - 1).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_knots(x, 3)
    h = np.diff(x)
    slopes = np.diff(y, axis=-1) / h

    n = len(x)
    system = TridiagonalSystem(
        sub=h[1:-1],
        diag=2.0 * (h[:-1] + h[1:]),
        sup=h[1:-1],
        rhs=3.0 * np.moveaxis(slopes[..., 1:] - slopes[..., :-1], -1, 0),
    )
    c = np.zeros(y.shape)
    c[..., 1:n - 1] = np.moveaxis(thomas_solve(system), 0, -1)

    a = y[..., :-1]
    b = slopes - h * (2.0 * c[..., :-1] + c[..., 1:]) / 3.0
    d = (c[..., 1:] - c[..., :-1]) / (3.0 * h)
    return a, b, c[..., :-1], d


def natural_spline_coeffs(knots: Sequence[Knot]) -> List[SplineSegment]:
    """
    Raises:
        TooFewKnots: fewer than 3 knots.
        NonMonotonicKnots: abscissae not strictly increasing.
    """
    x = np.array([k.x for k in knots], dtype=float)
    y = np.array([k.y for k in knots], dtype=float)
    a, b, c, d = natural_spline_arrays(x, y)
    return [
        SplineSegment(float(x[j]), float(a[j]), float(b[j]), float(c[j]), float(d[j]), float(x[j + 1]))
        for j in range(len(x) - 1)
    ]


def eval_spline_arrays(x_knots, coeffs: Tuple[np.ndarray, ...], t) -> np.ndarray:
    """Vectorised Horner evaluation of natural_spline_arrays output at points ``t``."""
    x_knots = np.asarray(x_knots, dtype=float)
    t = np.asarray(t, dtype=float)
    a, b, c, d = coeffs
    j = np.clip(np.searchsorted(x_knots, t, side="right") - 1, 0, len(x_knots) - 2)
    dx = t - x_knots[j]
    return a[..., j] + dx * (b[..., j] + dx * (c[..., j] + dx * d[..., j]))


def eval_spline(segments: Sequence, x, ctx: Optional[fx.ArithmeticContext] = None):
    """
    Evaluate a segment list at x. Real segments use Horner's scheme; fixed
    segments use Q16.8 arithmetic with div_lut ratios (x must be a sample index).

    Raises:
        OutOfRange: if x lies outside [first knot, last knot].
    """
    if not segments:
        raise TooFewKnots("empty segment list")
    lo, hi = segments[0].x0, segments[-1].x1
    if not lo <= x <= hi:
        raise OutOfRange(f"x={x} outside [{lo}, {hi}]")
    starts = [s.x0 for s in segments]
    j = max(0, min(int(np.searchsorted(starts, x, side="right")) - 1, len(segments) - 1))
    segment = segments[j]
    if isinstance(segment, FixedSplineSegment):
        return int(segment(int(x), ctx))
    return float(segment(x))


# ---------------------------------------------------------------------------
# Three-knot windows
# ---------------------------------------------------------------------------

def window_eval(x0, x1, x2, y0, y1, y2, t, linear: bool = False) -> np.ndarray:
    """
    Batched three-knot natural spline (real path), evaluated on whichever of the
    two intervals contains t. Knot arrays have shape (m,); ordinates (m,) or (N, m).
    """
    x0, x1, x2, t = (np.asarray(v, dtype=float) for v in (x0, x1, x2, t))
    y0, y1, y2 = (np.asarray(v, dtype=float) for v in (y0, y1, y2))
    h0 = x1 - x0
    h1 = x2 - x1
    d0 = y1 - y0
    d1 = y2 - y1
    second = t >= x1
    u = np.where(second, (t - x1) / h1, (t - x0) / h0)
    base = np.where(second, y1, y0)
    rise = np.where(second, d1, d0)
    value = base + rise * u
    if linear:
        return value
    span = 2.0 * (h0 + h1)
    g0 = h0 * (d1 * (h0 / h1) - d0) / span
    g1 = h1 * (d1 - d0 * (h1 / h0)) / span
    s = np.where(second, 1.0 - u, u)
    return value + np.where(second, g1, g0) * (s * s * s - s)


def _normalised_fixed(a, delta, g_left, g_right, u, ctx):
    one = fx.WIDE_ONE
    w = one - u
    lin = fx.shift_round(np.asarray(delta, dtype=np.int64) * u, fx.WIDE_FRAC_BITS)
    pu = fx.shift_round(fx.shift_round(u * u, fx.WIDE_FRAC_BITS) * u, fx.WIDE_FRAC_BITS) - u
    pw = fx.shift_round(fx.shift_round(w * w, fx.WIDE_FRAC_BITS) * w, fx.WIDE_FRAC_BITS) - w
    cub = (
        fx.shift_round(np.asarray(g_right, dtype=np.int64) * pu, fx.WIDE_FRAC_BITS)
        + fx.shift_round(np.asarray(g_left, dtype=np.int64) * pw, fx.WIDE_FRAC_BITS)
    )
    return fx.saturate(np.asarray(a, dtype=np.int64) + lin + cub, ctx)


def _window_weights_fixed(h0, h1, d0, d1, ctx):
    span = 2 * (h0 + h1)
    r01 = fx.ratio(h0, h1, ctx)
    r10 = fx.ratio(h1, h0, ctx)
    f0 = fx.ratio(h0, span, ctx)
    f1 = fx.ratio(h1, span, ctx)
    g0 = fx.shift_round((fx.shift_round(d1 * r01, fx.WIDE_FRAC_BITS) - d0) * f0, fx.WIDE_FRAC_BITS)
    g1 = fx.shift_round((d1 - fx.shift_round(d0 * r10, fx.WIDE_FRAC_BITS)) * f1, fx.WIDE_FRAC_BITS)
    return g0, g1


def window_eval_fixed(
    x0, x1, x2, y0, y1, y2, t,
    ctx: Optional[fx.ArithmeticContext] = None,
    linear: bool = False,
) -> np.ndarray:
    """Fixed-path counterpart of window_eval: integer sample positions, Q16.8 raw ordinates."""
    x0, x1, x2, t = (np.asarray(v, dtype=np.int64) for v in (x0, x1, x2, t))
    y0, y1, y2 = (np.asarray(v, dtype=np.int64) for v in (y0, y1, y2))
    h0 = x1 - x0
    h1 = x2 - x1
    d0 = y1 - y0
    d1 = y2 - y1
    second = t >= x1
    u = np.where(second, fx.ratio(t - x1, h1, ctx), fx.ratio(t - x0, h0, ctx))
    base = np.where(second, y1, y0)
    rise = np.where(second, d1, d0)
    if linear:
        lin = fx.shift_round(rise * u, fx.WIDE_FRAC_BITS)
        return fx.saturate(base + lin, ctx)
    g0, g1 = _window_weights_fixed(h0, h1, d0, d1, ctx)
    zero = np.zeros_like(g0)
    g_left = np.where(second, g1, zero)
    g_right = np.where(second, zero, g0)
    return _normalised_fixed(base, rise, g_left, g_right, u, ctx)


def window_segments_fixed(knots: Sequence[Knot], ctx: Optional[fx.ArithmeticContext] = None) -> List[FixedSplineSegment]:
    """The two fixed-path segments of a three-knot natural spline (integer x, raw y)."""
    if len(knots) != 3:
        raise TooFewKnots(f"a window needs exactly 3 knots, got {len(knots)}")
    x = np.array([int(k.x) for k in knots], dtype=np.int64)
    y = np.array([int(k.y) for k in knots], dtype=np.int64)
    _check_knots(x, 3)
    h0, h1 = int(x[1] - x[0]), int(x[2] - x[1])
    d0, d1 = int(y[1] - y[0]), int(y[2] - y[1])
    g0, g1 = _window_weights_fixed(np.int64(h0), np.int64(h1), np.int64(d0), np.int64(d1), ctx)
    return [
        FixedSplineSegment(int(x[0]), h0, int(y[0]), d0, 0, int(g0)),
        FixedSplineSegment(int(x[1]), h1, int(y[1]), d1, int(g1), 0),
    ]


def _query_points(query: Query) -> np.ndarray:
    if isinstance(query, tuple) and len(query) == 2:
        return np.arange(query[0], query[1])
    return np.asarray(query)


def interpolate_window(
    three_knots: Sequence[Knot],
    query_range: Optional[Query] = None,
    path: str = "real",
    ctx: Optional[fx.ArithmeticContext] = None,
) -> np.ndarray:
    """
    Online mode: natural spline over exactly three knots, evaluated over the
    leading interval [x0, x1) unless another range inside [x0, x2] is given.
    """
    if len(three_knots) != 3:
        raise TooFewKnots(f"a window needs exactly 3 knots, got {len(three_knots)}")
    x = np.array([k.x for k in three_knots], dtype=float)
    _check_knots(x, 3)
    if query_range is None:
        query_range = (int(np.ceil(x[0])), int(np.ceil(x[1])))
    t = _query_points(query_range)
    if t.size and (t.min() < x[0] or t.max() > x[2]):
        raise OutOfRange(f"query outside [{x[0]}, {x[2]}]")
    ones = np.ones(t.shape)
    cols = [ones * v for v in (x[0], x[1], x[2])]
    ys = [ones * k.y for k in three_knots]
    if path == "fixed":
        return window_eval_fixed(*cols, *ys, t, ctx)
    return window_eval(*cols, *ys, t)


def linear_interpolate(knots: Sequence[Knot], query_range: Query) -> np.ndarray:
    """Piecewise-linear envelope through the knots."""
    x = np.array([k.x for k in knots], dtype=float)
    y = np.array([k.y for k in knots], dtype=float)
    _check_knots(x, 2)
    t = _query_points(query_range).astype(float)
    if t.size and (t.min() < x[0] or t.max() > x[-1]):
        raise OutOfRange(f"query outside [{x[0]}, {x[-1]}]")
    return np.interp(t, x, y)
