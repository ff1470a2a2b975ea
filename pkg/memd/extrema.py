"""
Extrema identification over a three-sample sliding window.

Two tie policies:
    inclusive  both comparators use >= (<= for minima); every plateau sample emits.
    strict     only the first sample of a plateau emits, once the plateau is left
               in the opposite direction.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, TooShort

logger = logging.getLogger(__name__)

MAXIMA = "maxima"
MINIMA = "minima"
MODES = (MAXIMA, MINIMA)

INCLUSIVE = "inclusive"
STRICT = "strict"
TIE_POLICIES = (INCLUSIVE, STRICT)


def _check(mode: str, policy: str) -> None:
    if mode not in MODES:
        raise ConfigError(f"unknown extrema mode {mode!r}")
    if policy not in TIE_POLICIES:
        raise ConfigError(f"unknown tie policy {policy!r}")


@dataclass(frozen=True)
class ExtremaRecord:
    index: int
    value: float
    kind: str
    detected_at: int


class ExtremaStream:
    """Single-owner streaming extrema detector for one signal and one polarity."""

    def __init__(self, mode: str = MAXIMA, policy: str = INCLUSIVE, start_index: int = 0):
        _check(mode, policy)
        self.mode = mode
        self.policy = policy
        self.count = 0
        self._next_index = start_index
        # inclusive: trailing samples of the window
        self._window: List = []
        # strict: (value of the previous run, start and value of the current run)
        self._prev_run = None
        self._run_start: Optional[int] = None
        self._run_value = None

    @property
    def kind(self) -> str:
        return "maximum" if self.mode == MAXIMA else "minimum"

    @property
    def next_index(self) -> int:
        return self._next_index

    @property
    def run_start(self) -> Optional[int]:
        """Start of the plateau still open under the strict policy."""
        return self._run_start if self.policy == STRICT else None

    def _is_peak(self, left, centre, right, strict: bool) -> bool:
        if self.mode == MAXIMA:
            return centre > left and centre > right if strict else centre >= left and centre >= right
        return centre < left and centre < right if strict else centre <= left and centre <= right

    def push(self, sample, index: Optional[int] = None) -> Optional[ExtremaRecord]:
        """
        Feed one sample. Returns a record when the sample confirms an extremum.

        Raises:
            IndexError: if ``index`` is not the next consecutive index.
        """
        if index is None:
            index = self._next_index
        elif index != self._next_index:
            raise IndexError(f"expected sample index {self._next_index}, got {index}")
        self._next_index += 1

        record = None
        if self.policy == INCLUSIVE:
            if len(self._window) == 2 and self._is_peak(self._window[0], self._window[1], sample, False):
                record = ExtremaRecord(index - 1, self._window[1], self.kind, index)
            self._window = [*self._window[-1:], sample]
        else:
            if self._run_value is None:
                self._run_start, self._run_value = index, sample
            elif sample != self._run_value:
                if self._prev_run is not None and self._is_peak(self._prev_run, self._run_value, sample, True):
                    record = ExtremaRecord(self._run_start, self._run_value, self.kind, index)
                self._prev_run = self._run_value
                self._run_start, self._run_value = index, sample

        if record is not None:
            self.count += 1
        return record

    def extend(self, samples: Sequence, start_index: Optional[int] = None) -> List[ExtremaRecord]:
        """Feed a block; equivalent to pushing every sample in order."""
        if start_index is not None and start_index != self._next_index:
            raise IndexError(f"expected sample index {self._next_index}, got {start_index}")
        samples = np.asarray(samples)
        if self.policy == STRICT or len(samples) <= 4:
            out = []
            for s in samples:
                r = self.push(s.item() if hasattr(s, "item") else s)
                if r is not None:
                    out.append(r)
            return out

        base = self._next_index - len(self._window)
        window = np.asarray(self._window) if self._window else samples[:0]
        dtype = np.result_type(window, samples)
        y = np.concatenate([window.astype(dtype), samples.astype(dtype)])
        idx, det = _inclusive_indices(y, self.mode)
        self._window = [v.item() for v in y[-2:]]
        self._next_index += len(samples)
        records = [
            ExtremaRecord(int(base + i), y[i].item(), self.kind, int(base + d))
            for i, d in zip(idx, det)
        ]
        self.count += len(records)
        return records


def _inclusive_indices(y: np.ndarray, mode: str) -> Tuple[np.ndarray, np.ndarray]:
    if len(y) < 3:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    centre, left, right = y[1:-1], y[:-2], y[2:]
    if mode == MAXIMA:
        mask = (centre >= left) & (centre >= right)
    else:
        mask = (centre <= left) & (centre <= right)
    idx = np.flatnonzero(mask).astype(np.int64) + 1
    return idx, idx + 1


def _strict_indices(y: np.ndarray, mode: str) -> Tuple[np.ndarray, np.ndarray]:
    if len(y) < 3:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    starts = np.flatnonzero(np.r_[True, y[1:] != y[:-1]]).astype(np.int64)
    vals = y[starts]
    if len(starts) < 3:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    centre, left, right = vals[1:-1], vals[:-2], vals[2:]
    if mode == MAXIMA:
        mask = (centre > left) & (centre > right)
    else:
        mask = (centre < left) & (centre < right)
    runs = np.flatnonzero(mask) + 1
    return starts[runs], starts[runs + 1]


def extrema_indices(y: np.ndarray, mode: str = MAXIMA, policy: str = INCLUSIVE) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised detector: (indices, detected_at) arrays, same semantics as ExtremaStream."""
    _check(mode, policy)
    y = np.asarray(y)
    if policy == INCLUSIVE:
        return _inclusive_indices(y, mode)
    return _strict_indices(y, mode)


def detect_extrema(signal: Sequence, mode: str = MAXIMA, policy: str = INCLUSIVE) -> List[ExtremaRecord]:
    """
    Interior extrema of a whole sequence. The first and last samples never qualify.

    Raises:
        TooShort: if the sequence has fewer than 3 samples.
    """
    y = np.asarray(signal)
    if len(y) < 3:
        raise TooShort(f"extrema detection needs at least 3 samples, got {len(y)}")
    idx, det = extrema_indices(y, mode, policy)
    kind = "maximum" if mode == MAXIMA else "minimum"
    return [ExtremaRecord(int(i), y[i].item(), kind, int(d)) for i, d in zip(idx, det)]


def dedup_mask(
    idx: np.ndarray,
    values: np.ndarray,
    previous: Optional[Tuple[int, object]] = None,
) -> np.ndarray:
    """
    Keep-mask collapsing runs of records at adjacent indices with equal values
    to their first record. ``previous`` is the last record of an earlier block.
    """
    idx = np.asarray(idx)
    values = np.asarray(values)
    keep = np.ones(len(idx), dtype=bool)
    if len(idx) == 0:
        return keep
    keep[1:] = ~((np.diff(idx) == 1) & (values[1:] == values[:-1]))
    if previous is not None:
        prev_idx, prev_val = previous
        keep[0] = not (idx[0] - prev_idx == 1 and values[0] == prev_val)
    return keep


def dedup_records(records: Sequence[ExtremaRecord]) -> List[ExtremaRecord]:
    if not records:
        return []
    idx = np.array([r.index for r in records])
    values = np.array([r.value for r in records])
    keep = dedup_mask(idx, values)
    return [r for r, k in zip(records, keep) if k]
