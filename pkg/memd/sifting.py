"""
Sifting: projection, per-direction extrema, envelopes, local mean, subtraction.

Envelope rule shared by batch and streaming operation
------------------------------------------------------
An envelope is built from the deduplicated extrema of one projection and
polarity; knot abscissae come from the projection, ordinates from each channel.
Every record carries the sample index whose arrival confirmed it.

Sample t looks ahead to the horizon H = t + kmax. Its knot list holds the
records confirmed by H, preceded by two records mirrored about sample 0 and
followed by two mirrored knots: about the last sample when the record ends by
H, otherwise about H itself. In windowed mode t is evaluated on the natural
spline through the ``support`` knots either side of its interval; linear mode
joins the two knots of the interval. With one confirmed record the envelope is
flat, with none it is the channel sample itself.

The value of every sample is therefore a function of the data, kmax and
support alone, so a stream that emits t once its window can no longer change
produces exactly what a batch pass over the whole record produces.

On the fixed path the sifting state is carried in the guarded format of
:mod:`memd.fixed_point`; the public operations take and return Q16.8.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import fixed_point as fx
from . import kernels
from .directions import DirectionSet
from .errors import (
    ConfigError,
    DimensionMismatch,
    ResidueReached,
    TooFewExtrema,
)
from .extrema import (
    INCLUSIVE,
    MAXIMA,
    MINIMA,
    TIE_POLICIES,
    ExtremaRecord,
    ExtremaStream,
    dedup_mask,
    extrema_indices,
)
from .signals import FIXED, PATHS, REAL, MultivariateSignal
from .spline import Knot, eval_spline_arrays, natural_spline_arrays

logger = logging.getLogger(__name__)

CUBIC = "cubic"
LINEAR = "linear"
ENVELOPES = (CUBIC, LINEAR)

WINDOWED = "windowed"
GLOBAL = "global"
SPLINE_WINDOWS = (WINDOWED, GLOBAL)

MEAN_2K = "2k"
MEAN_K = "k"
MEAN_MODES = (MEAN_2K, MEAN_K)

MIRROR = "mirror"
BOUNDARIES = (MIRROR,)

DEFAULT_KMAX = 4096
DEFAULT_SUPPORT = 4


@dataclass(frozen=True)
class SiftConfig:
    directions: int = 8
    siftings: int = 4
    boundary: str = MIRROR
    tie_policy: str = INCLUSIVE
    envelope: str = CUBIC
    path: str = REAL
    spline_window: str = WINDOWED
    mean_mode: str = MEAN_2K
    kmax: int = DEFAULT_KMAX
    support: int = DEFAULT_SUPPORT

    def __post_init__(self):
        if self.directions < 1:
            raise ConfigError("directions must be >= 1")
        if self.siftings < 1:
            raise ConfigError("siftings must be >= 1")
        if self.kmax < 1:
            raise ConfigError("kmax must be >= 1")
        if self.support < 1:
            raise ConfigError("support must be >= 1")
        for name, value, allowed in (
            ("boundary", self.boundary, BOUNDARIES),
            ("tie_policy", self.tie_policy, TIE_POLICIES),
            ("envelope", self.envelope, ENVELOPES),
            ("path", self.path, PATHS),
            ("spline_window", self.spline_window, SPLINE_WINDOWS),
            ("mean_mode", self.mean_mode, MEAN_MODES),
        ):
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")
        if self.path == FIXED and self.spline_window == GLOBAL:
            raise ConfigError("the fixed path evaluates windowed envelopes only")

    @property
    def polarities(self) -> Tuple[str, ...]:
        return (MAXIMA, MINIMA) if self.mean_mode == MEAN_2K else (MAXIMA,)

    @property
    def n_envelopes(self) -> int:
        return self.directions * len(self.polarities)

    @property
    def linear(self) -> bool:
        return self.envelope == LINEAR


@dataclass
class Envelope:
    direction: int
    polarity: str
    values: np.ndarray


@dataclass
class EnvelopeRecords:
    """Deduplicated extrema of one projection/polarity with their channel ordinates (N x n)."""

    idx: np.ndarray
    det: np.ndarray
    ords: np.ndarray

    def __len__(self) -> int:
        return len(self.idx)


# ---------------------------------------------------------------------------
# Working format
# ---------------------------------------------------------------------------

def to_working(samples: np.ndarray, path: str) -> np.ndarray:
    """Samples as the sifting loop carries them: guarded raws on the fixed path."""
    return fx.widen(samples) if path == FIXED else samples


def from_working(work: np.ndarray, path: str, ctx: Optional[fx.ArithmeticContext] = None) -> np.ndarray:
    return fx.narrow(work, ctx) if path == FIXED else work


# ---------------------------------------------------------------------------
# Projection
# ---------------------------------------------------------------------------

def _accumulate(samples: np.ndarray, dirs: DirectionSet, path: str) -> np.ndarray:
    if samples.shape[0] != dirs.n_channels:
        raise DimensionMismatch(
            f"signal has {samples.shape[0]} channels, directions have {dirs.n_channels}"
        )
    coeff = dirs.coeff_raw[:, :, None] if path == FIXED else dirs.vectors[:, :, None]
    acc = coeff[:, 0] * samples[0]
    for i in range(1, samples.shape[0]):
        acc = acc + coeff[:, i] * samples[i]
    return acc


def project_samples(
    samples: np.ndarray, dirs: DirectionSet, path: str, ctx: Optional[fx.ArithmeticContext] = None
) -> np.ndarray:
    """K x T projections. Sums run in channel order on both paths."""
    acc = _accumulate(samples, dirs, path)
    if path == FIXED:
        return fx.saturate(fx.shift_round(acc, dirs.frac_bits), ctx)
    return acc


def projection_keys(work: np.ndarray, dirs: DirectionSet, path: str) -> np.ndarray:
    """
    Projections of working samples as the extrema detectors see them. The
    fixed path compares the unrounded accumulator sums.
    """
    return _accumulate(work, dirs, path)


def project(
    x: MultivariateSignal, dirs: DirectionSet, ctx: Optional[fx.ArithmeticContext] = None
) -> np.ndarray:
    """
    y_k(t) = sum_i a_i^k x_i(t) for every direction k.

    Raises:
        DimensionMismatch: if channel counts differ.
    """
    return project_samples(x.samples, dirs, x.path, ctx)


# ---------------------------------------------------------------------------
# Knots
# ---------------------------------------------------------------------------

def find_records(y: np.ndarray, mode: str, policy: str) -> Tuple[np.ndarray, np.ndarray]:
    """Deduplicated extrema (indices, detected_at) of one projection."""
    idx, det = extrema_indices(y, mode, policy)
    keep = dedup_mask(idx, y[idx])
    return idx[keep], det[keep]


def envelope_knots(
    x_i: Sequence[float],
    records: Sequence[ExtremaRecord],
    boundary: str = MIRROR,
) -> List[Knot]:
    """
    Knots at the record indices with ordinates read from the channel, mirrored
    two per edge about the first and last samples.

    Raises:
        TooFewExtrema: fewer than two records (nothing to mirror into >= 3 knots).
    """
    if boundary != MIRROR:
        raise ConfigError(f"unknown boundary policy {boundary!r}")
    x_i = np.asarray(x_i)
    if len(records) < 2:
        raise TooFewExtrema(f"{len(records)} extrema; an envelope needs at least 2")
    idx = np.array([r.index for r in records], dtype=np.int64)
    kx, ky = _mirrored(idx, x_i[idx], len(x_i))
    return [Knot(float(a), b.item()) for a, b in zip(kx, ky)]


def _mirrored(idx: np.ndarray, ords: np.ndarray, length: int) -> Tuple[np.ndarray, np.ndarray]:
    last = length - 1
    kx = np.concatenate([-idx[1::-1], idx, 2 * last - idx[:-3:-1]])
    ky = np.concatenate([ords[..., 1::-1], ords, ords[..., :-3:-1]], axis=-1)
    return kx, ky


# ---------------------------------------------------------------------------
# Envelope evaluation
# ---------------------------------------------------------------------------

def envelope_total(
    t0: int,
    fallback: np.ndarray,
    records: Sequence[EnvelopeRecords],
    config: SiftConfig,
    offsets: Optional[Sequence[int]] = None,
    end: Optional[int] = None,
    ctx: Optional[fx.ArithmeticContext] = None,
) -> np.ndarray:
    """
    Sum of windowed envelopes over samples [t0, t0 + fallback.shape[1]).

    Args:
        fallback: working channel samples over the same range.
        records: known records of each envelope, summed in this order.
        offsets: per envelope, the number of earlier records no longer held.
        end: signal length once known; enables the end-mirror knots.
    """
    fallback = np.ascontiguousarray(fallback)
    total = np.zeros_like(fallback)
    if fallback.shape[1] == 0 or not records:
        return total
    if offsets is None:
        offsets = [0] * len(records)
    sizes = [len(rec) for rec in records]
    bounds = np.zeros(len(records) + 1, dtype=np.int64)
    bounds[1:] = np.cumsum(sizes)
    idx = np.concatenate([rec.idx for rec in records]).astype(np.int64)
    det = np.concatenate([rec.det for rec in records]).astype(np.int64)
    ords = np.ascontiguousarray(
        np.concatenate([rec.ords for rec in records], axis=1).T, dtype=fallback.dtype
    )
    args = (
        total, int(t0), fallback, idx, det, ords, bounds,
        np.asarray(offsets, dtype=np.int64),
        -1 if end is None else int(end),
        int(config.kmax), int(config.support), bool(config.linear),
    )
    if config.path == FIXED:
        misses = kernels.envelope_total_fixed(*args, fx.reciprocal_table())
        if ctx is not None:
            ctx.note_table_miss(int(misses))
    else:
        kernels.envelope_total_real(*args)
    return total


def horizon_envelope(
    rec: EnvelopeRecords,
    fallback: np.ndarray,
    config: SiftConfig,
    t0: int = 0,
    end: Optional[int] = None,
    offset: int = 0,
    ctx: Optional[fx.ArithmeticContext] = None,
) -> np.ndarray:
    """One windowed envelope over [t0, t0 + fallback.shape[1]) under the lookahead rule."""
    return envelope_total(t0, fallback, [rec], config, [offset], end, ctx)


def global_envelope(samples: np.ndarray, idx: np.ndarray, linear: bool = False) -> np.ndarray:
    """Envelope through all mirrored knots (real path, whole record)."""
    length = samples.shape[1]
    kx, ky = _mirrored(idx, samples[:, idx], length)
    t = np.arange(length)
    if linear:
        j = np.clip(np.searchsorted(kx, t, side="right") - 1, 0, len(kx) - 2)
        h = (kx[j + 1] - kx[j]).astype(float)
        return ky[:, j] + (ky[:, j + 1] - ky[:, j]) * (t - kx[j]) / h
    coeffs = natural_spline_arrays(kx, ky)
    return eval_spline_arrays(kx, coeffs, t)


# ---------------------------------------------------------------------------
# Batch local mean and sifting (working format)
# ---------------------------------------------------------------------------

def _mean_constant(config: SiftConfig) -> fx.CsdConstant:
    return fx.CsdConstant.from_real(1.0 / config.n_envelopes)


def _combine_mean(total: np.ndarray, config: SiftConfig, ctx) -> np.ndarray:
    if config.path == FIXED:
        c = _mean_constant(config)
        return fx.saturate_guarded(fx.shift_round(fx.csd_accumulate(total, c), c.frac_bits), ctx)
    return total * (1.0 / config.n_envelopes)


def _subtract(a: np.ndarray, b: np.ndarray, path: str, ctx) -> np.ndarray:
    if path == FIXED:
        return fx.saturate_guarded(np.asarray(a, dtype=np.int64) - b, ctx)
    return a - b


def envelope_set(
    work: np.ndarray,
    dirs: DirectionSet,
    config: SiftConfig,
) -> List[Tuple[int, str, EnvelopeRecords]]:
    """
    Records of every (direction, polarity) envelope of working samples.

    Raises:
        ResidueReached: when some envelope has fewer than two records.
    """
    y = projection_keys(work, dirs, config.path)
    out = []
    for k in range(config.directions):
        for polarity in config.polarities:
            idx, det = find_records(y[k], polarity, config.tie_policy)
            if len(idx) < 2:
                raise ResidueReached(f"direction {k} {polarity}: {len(idx)} extrema")
            out.append((k, polarity, EnvelopeRecords(idx, det, work[:, idx])))
    return out


def _whole_record_total(work, records: List[EnvelopeRecords], config: SiftConfig, ctx) -> np.ndarray:
    if config.spline_window == GLOBAL:
        total = np.zeros_like(work, dtype=float)
        for rec in records:
            total = total + global_envelope(work, rec.idx, config.linear)
        return total
    return envelope_total(0, work, records, config, end=work.shape[1], ctx=ctx)


def envelopes(
    x: MultivariateSignal,
    dirs: DirectionSet,
    config: SiftConfig,
    ctx: Optional[fx.ArithmeticContext] = None,
) -> List[Envelope]:
    """All envelopes of a whole record, in direction then polarity order, in the signal's format."""
    work = to_working(x.samples, config.path)
    out = []
    for k, polarity, rec in envelope_set(work, dirs, config):
        values = _whole_record_total(work, [rec], config, ctx)
        out.append(Envelope(k, polarity, from_working(values, config.path, ctx)))
    return out


def local_mean_samples(
    work: np.ndarray,
    dirs: DirectionSet,
    config: SiftConfig,
    ctx: Optional[fx.ArithmeticContext] = None,
) -> Tuple[np.ndarray, int]:
    """Local mean of working samples and the number of extrema used."""
    found = envelope_set(work, dirs, config)
    records = [rec for _, _, rec in found]
    total = _whole_record_total(work, records, config, ctx)
    return _combine_mean(total, config, ctx), sum(len(rec) for rec in records)


def local_mean(
    x: MultivariateSignal,
    dirs: DirectionSet,
    config: SiftConfig,
    ctx: Optional[fx.ArithmeticContext] = None,
) -> MultivariateSignal:
    """
    Average of the envelopes on every channel: all envelope values are summed,
    then multiplied once by 1/(2K) (1/K in the maxima-only variant).

    Raises:
        ResidueReached: if any projection lacks extrema.
    """
    mean, _ = local_mean_samples(to_working(x.samples, config.path), dirs, config, ctx)
    return x.with_samples(from_working(mean, config.path, ctx))


def sift_once(
    x: MultivariateSignal,
    dirs: DirectionSet,
    config: SiftConfig,
    ctx: Optional[fx.ArithmeticContext] = None,
) -> MultivariateSignal:
    """h = x - local_mean(x)."""
    work = to_working(x.samples, config.path)
    mean, _ = local_mean_samples(work, dirs, config, ctx)
    h = _subtract(work, mean, config.path, ctx)
    return x.with_samples(from_working(h, config.path, ctx))


def extract_imf_samples(
    work: np.ndarray,
    dirs: DirectionSet,
    config: SiftConfig,
    ctx: Optional[fx.ArithmeticContext] = None,
) -> Tuple[np.ndarray, np.ndarray, Dict]:
    """S fixed sifting iterations on working samples. Returns (imf, residue, info)."""
    h = work
    info = {"siftings_run": 0, "residue_reached": False}
    for iteration in range(config.siftings):
        try:
            mean, _ = local_mean_samples(h, dirs, config, ctx)
        except ResidueReached as exc:
            if iteration == 0:
                logger.info("input is a residue: %s", exc)
                info["residue_reached"] = True
                return np.zeros_like(work), work.copy(), info
            logger.debug("sifting stopped after %d iterations: %s", iteration, exc)
            break
        h = _subtract(h, mean, config.path, ctx)
        info["siftings_run"] = iteration + 1
    residue = _subtract(work, h, config.path, ctx)
    return h, residue, info


def extract_imf(
    x: MultivariateSignal,
    dirs: DirectionSet,
    config: SiftConfig,
    ctx: Optional[fx.ArithmeticContext] = None,
) -> Tuple[MultivariateSignal, MultivariateSignal]:
    """
    One IMF by S sifting iterations; residue = x - imf.

    The fixed path sifts in the guarded format and rounds the IMF once, so
    imf + residue == x holds on the raw integers. When x is already a residue
    the IMF is zero and the residue is x.
    """
    imf, residue, _ = extract_imf_samples(to_working(x.samples, config.path), dirs, config, ctx)
    if config.path == FIXED:
        imf = fx.narrow(imf, ctx)
        residue = fx.sub(x.samples, imf, ctx)
    return x.with_samples(imf), x.with_samples(residue)


# ---------------------------------------------------------------------------
# Streaming sift stage
# ---------------------------------------------------------------------------

class _EnvelopeTrack:
    """Known records of one envelope inside a streaming stage."""

    def __init__(self, mode: str, policy: str, n_channels: int, dtype):
        self.detector = ExtremaStream(mode, policy)
        self.idx: List[int] = []
        self.det: List[int] = []
        self.ords: List[np.ndarray] = []
        self.offset = 0
        self.last_raw: Optional[Tuple[int, object]] = None
        # channel samples at the start of an open plateau (strict policy)
        self._plateau: Optional[Tuple[int, np.ndarray]] = None
        self._n_channels = n_channels
        self._dtype = dtype

    def _ordinate(self, index: int, column) -> np.ndarray:
        if self._plateau is not None and self._plateau[0] == index:
            return self._plateau[1]
        return column(index)

    def add(self, records: Sequence[ExtremaRecord], column) -> None:
        if records:
            idx = np.array([r.index for r in records], dtype=np.int64)
            values = np.array([r.value for r in records])
            keep = dedup_mask(idx, values, self.last_raw)
            self.last_raw = (records[-1].index, records[-1].value)
            for r, k in zip(records, keep):
                if k:
                    self.idx.append(r.index)
                    self.det.append(r.detected_at)
                    self.ords.append(self._ordinate(r.index, column))
        start = self.detector.run_start
        if start is not None and (self._plateau is None or self._plateau[0] != start):
            self._plateau = (start, column(start))

    def settled_until(self, t: int, kmax: int, support: int) -> int:
        """
        First sample from ``t`` on whose window may still change. A window is
        settled once the record ``support`` places past its interval is known
        and confirmed within kmax of the sample.
        """
        idx = self.idx
        while True:
            below = int(np.searchsorted(idx, t, side="right"))
            needed = below + support
            if needed >= len(idx) or self.det[needed] - kmax > t:
                return t
            t = idx[below]

    def records(self) -> EnvelopeRecords:
        if self.idx:
            ords = np.stack(self.ords, axis=1)
        else:
            ords = np.zeros((self._n_channels, 0), dtype=self._dtype)
        return EnvelopeRecords(
            np.array(self.idx, dtype=np.int64), np.array(self.det, dtype=np.int64), ords
        )

    def prune(self, watermark: int, kmax: int, support: int) -> None:
        """Drop records that no window of a sample >= watermark can reach."""
        placed = min(
            int(np.searchsorted(self.idx, watermark, side="right")),
            int(np.searchsorted(self.det, watermark + kmax, side="right")),
        )
        drop = max(0, placed - 1 - support)
        if drop:
            del self.idx[:drop], self.det[:drop], self.ords[:drop]
            self.offset += drop


class SiftStage:
    """
    One sifting iteration operating on a stream of working samples.

    ``feed`` accepts a block of samples together with a pass-through ``carry``
    block and returns the newly final part of h = x - mean with the matching
    carry. Values equal the batch rule; only their timing depends on the feed.
    """

    def __init__(
        self,
        dirs: DirectionSet,
        config: SiftConfig,
        ctx: Optional[fx.ArithmeticContext] = None,
        emit_chunk: int = 32,
        carry_rows: Optional[int] = None,
    ):
        if config.spline_window != WINDOWED:
            raise ConfigError("streaming needs the windowed spline mode")
        self.dirs = dirs
        self.config = config
        self.ctx = ctx
        self.emit_chunk = max(1, emit_chunk)
        n = dirs.n_channels
        self._dtype = np.int64 if config.path == FIXED else float
        self._x = np.zeros((n, 0), dtype=self._dtype)
        self._carry = np.zeros((n if carry_rows is None else carry_rows, 0), dtype=self._dtype)
        self._buf_start = 0
        self.watermark = 0
        self.received = 0
        self._tracks = [
            _EnvelopeTrack(polarity, config.tie_policy, n, self._dtype)
            for _ in range(config.directions)
            for polarity in config.polarities
        ]

    @property
    def buffered(self) -> int:
        return self._x.shape[1]

    def _column(self, index: int) -> np.ndarray:
        return self._x[:, index - self._buf_start].copy()

    def feed(self, block: np.ndarray, carry: np.ndarray) -> Tuple[int, np.ndarray, np.ndarray]:
        block = np.asarray(block, dtype=self._dtype)
        carry = np.asarray(carry, dtype=self._dtype)
        if block.shape[1]:
            self._x = np.concatenate([self._x, block], axis=1)
            self._carry = np.concatenate([self._carry, carry], axis=1)
            y = projection_keys(block, self.dirs, self.config.path)
            polarities = len(self.config.polarities)
            for e, track in enumerate(self._tracks):
                k = e // polarities
                track.add(track.detector.extend(y[k]), self._column)
            self.received += block.shape[1]
        return self._emit(final=False)

    def flush(self) -> Tuple[int, np.ndarray, np.ndarray]:
        return self._emit(final=True)

    def _ready_end(self) -> int:
        # everything up to the horizon is known for t < received - kmax
        kmax, support = self.config.kmax, self.config.support
        start = max(self.watermark, self.received - kmax)
        ready = min(track.settled_until(start, kmax, support) for track in self._tracks)
        return min(ready, self.received)

    def _emit(self, final: bool) -> Tuple[int, np.ndarray, np.ndarray]:
        start = self.watermark
        ready = self.received if final else self._ready_end()
        count = ready - start
        n = self._x.shape[0]
        if count <= 0 or (not final and count < self.emit_chunk):
            return start, np.zeros((n, 0), dtype=self._dtype), self._carry[:, :0]

        cols = slice(start - self._buf_start, ready - self._buf_start)
        x = self._x[:, cols]
        tracks = self._tracks
        total = envelope_total(
            start,
            x,
            [track.records() for track in tracks],
            self.config,
            offsets=[track.offset for track in tracks],
            end=self.received if final else None,
            ctx=self.ctx,
        )
        mean = _combine_mean(total, self.config, self.ctx)
        h = _subtract(x, mean, self.config.path, self.ctx)
        carry = self._carry[:, cols].copy()

        self.watermark = ready
        for track in tracks:
            track.prune(ready, self.config.kmax, self.config.support)
        drop = ready - self._buf_start
        if drop > 0:
            self._x = self._x[:, drop:]
            self._carry = self._carry[:, drop:]
            self._buf_start = ready
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug("stage emitted [%d, %d)%s", start, ready, " (flush)" if final else "")
        return start, h, carry
