"""
Validation metrics: correlation against ground-truth tones, Welch PSD, and
IMF condition checks.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import signal as sp_signal
from scipy import stats
from scipy.integrate import trapezoid

from .errors import DegenerateInput, TooShort
from .extrema import MAXIMA, MINIMA, STRICT, extrema_indices
from .signals import ImfStack, MultivariateSignal

logger = logging.getLogger(__name__)

ALPHA_BAND = (8.0, 15.0)

# reference correlations of the quad-tone decomposition (IMF rows, channel columns)
QUADTONE_REFERENCE = np.array([
    [0.997, 0.104, 0.997, 0.104],
    [0.989, 0.992, 0.988, 0.990],
    [0.005, 0.112, 0.936, 0.936],
    [0.985, 0.996, 0.025, 0.944],
])
HIGH_REFERENCE = 0.9
HIGH_THRESHOLD = 0.90
LOW_REFERENCE = 0.12
LOW_THRESHOLD = 0.35


def pearson_corr(a: Sequence[float], b: Sequence[float]) -> float:
    """
    Sample Pearson correlation.

    Raises:
        DegenerateInput: unequal lengths, fewer than 2 samples, or zero variance.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DegenerateInput(f"sequences must be 1-D of equal length, got {a.shape} and {b.shape}")
    if len(a) < 2:
        raise DegenerateInput("correlation needs at least 2 samples")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateInput("correlation is undefined for a constant sequence")
    r, _ = stats.pearsonr(a, b)
    return float(np.clip(r, -1.0, 1.0))


# ---------------------------------------------------------------------------
# Correlation tables
# ---------------------------------------------------------------------------

@dataclass
class CorrelationReport:
    """Signed correlations: rows are IMFs (with their assigned tone), columns channels."""

    matrix: np.ndarray
    row_labels: List[str]
    column_labels: List[str]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.matrix, index=self.row_labels, columns=self.column_labels)

    def to_csv(self, path: Union[str, Path]) -> None:
        frame = self.to_frame()
        frame.index.name = "imf"
        frame.to_csv(path, float_format="%.6f")

    def to_text(self) -> str:
        return self.to_frame().to_string(float_format=lambda v: f"{v:7.3f}")


def correlation_report(
    stack: ImfStack,
    truths: Sequence[np.ndarray],
    truth_labels: Optional[Sequence[str]] = None,
) -> CorrelationReport:
    """
    Correlate IMF j of every channel with truth j.

    ``truths[j]`` is one tone (shape (T,)) or a per-channel matrix (N, T).
    Cells where either side is constant are reported as 0.
    """
    real = stack.to_real()
    rows = min(len(truths), real.m_imfs)
    matrix = np.zeros((rows, real.n_channels))
    for j in range(rows):
        truth = np.asarray(truths[j], dtype=float)
        for i in range(real.n_channels):
            reference = truth[i] if truth.ndim == 2 else truth
            try:
                matrix[j, i] = pearson_corr(real.imfs[j, i], reference)
            except DegenerateInput:
                matrix[j, i] = 0.0
    labels = list(truth_labels) if truth_labels is not None else [f"truth {j + 1}" for j in range(rows)]
    row_labels = [f"C{j + 1} / {labels[j]}" for j in range(rows)]
    column_labels = [f"ch{i + 1}" for i in range(real.n_channels)]
    return CorrelationReport(matrix, row_labels, column_labels)


@dataclass
class ThresholdCheck:
    passed: bool
    failures: List[str] = field(default_factory=list)


def check_quadtone(report: CorrelationReport, reference: np.ndarray = QUADTONE_REFERENCE) -> ThresholdCheck:
    """
    Cells with a reference >= 0.9 must reach 0.90; cells with a reference
    <= 0.12 must stay within 0.35 in absolute value. Others are unconstrained.
    """
    failures = []
    rows, cols = reference.shape
    if report.matrix.shape[0] < rows or report.matrix.shape[1] < cols:
        return ThresholdCheck(False, [f"report is {report.matrix.shape}, expected {reference.shape}"])
    for j in range(rows):
        for i in range(cols):
            ref, got = reference[j, i], report.matrix[j, i]
            if ref >= HIGH_REFERENCE and got < HIGH_THRESHOLD:
                failures.append(f"{report.row_labels[j]} {report.column_labels[i]}: {got:.3f} < {HIGH_THRESHOLD}")
            elif ref <= LOW_REFERENCE and abs(got) > LOW_THRESHOLD:
                failures.append(f"{report.row_labels[j]} {report.column_labels[i]}: |{got:.3f}| > {LOW_THRESHOLD}")
    return ThresholdCheck(not failures, failures)


def path_agreement(fixed: ImfStack, real: ImfStack) -> np.ndarray:
    """
    Per-(IMF, channel) correlation between a fixed-path and a real-path stack.
    Cells where both IMFs vanish count as full agreement.
    """
    a = fixed.to_real()
    rows = min(a.m_imfs, real.m_imfs)
    out = np.ones((rows, a.n_channels))
    for j in range(rows):
        for i in range(a.n_channels):
            try:
                out[j, i] = pearson_corr(a.imfs[j, i], real.imfs[j, i])
            except DegenerateInput:
                out[j, i] = 1.0 if np.ptp(a.imfs[j, i]) == np.ptp(real.imfs[j, i]) == 0 else 0.0
    return out


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass
class PsdEstimate:
    frequencies: np.ndarray
    power: np.ndarray
    nperseg: int
    noverlap: int
    window: str = "hann"

    @property
    def total_power(self) -> float:
        return float(trapezoid(self.power, self.frequencies))


def psd_welch(
    x: Sequence[float],
    sample_rate: float,
    nperseg: int = 256,
    overlap: float = 0.5,
    window: str = "hann",
) -> PsdEstimate:
    """
    Averaged windowed periodograms (density scaling, one-sided).

    Raises:
        TooShort: if the input is shorter than one segment.
    """
    data = np.asarray(x, dtype=float)
    if len(data) < nperseg:
        raise TooShort(f"Welch estimate needs {nperseg} samples, got {len(data)}")
    noverlap = int(overlap * nperseg)
    freqs, psd = sp_signal.welch(
        data,
        fs=sample_rate,
        window=window,
        nperseg=nperseg,
        noverlap=noverlap,
        detrend="constant",
        scaling="density",
        average="mean",
    )
    return PsdEstimate(freqs, psd, nperseg, noverlap, window)


def band_power(psd: PsdEstimate, lo: float, hi: float) -> float:
    """Trapezoid-integrated power between lo and hi Hz."""
    mask = (psd.frequencies >= lo) & (psd.frequencies <= hi)
    if np.count_nonzero(mask) < 2:
        return float(np.sum(psd.power[mask]) * (psd.frequencies[1] - psd.frequencies[0]))
    return float(trapezoid(psd.power[mask], psd.frequencies[mask]))


def peak_frequency(psd: PsdEstimate, skip_dc: bool = True) -> float:
    start = 1 if skip_dc and len(psd.power) > 1 else 0
    return float(psd.frequencies[start + int(np.argmax(psd.power[start:]))])


@dataclass
class AlphaStudy:
    peaks: np.ndarray  # (IMF, channel) peak frequencies in Hz
    alpha_imf: Optional[int]
    alpha_imfs: List[int]
    active_power: float
    inactive_power: float

    @property
    def power_ratio(self) -> float:
        if self.inactive_power <= 0:
            return float("inf") if self.active_power > 0 else 0.0
        return self.active_power / self.inactive_power

    def to_text(self) -> str:
        lines = ["IMF peak frequencies (Hz):"]
        for j, row in enumerate(self.peaks):
            lines.append(f"  C{j + 1}: " + "  ".join(f"{v:6.2f}" for v in row))
        if self.alpha_imf is None:
            lines.append("no IMF peaks inside the alpha band")
        else:
            lines.append(f"alpha IMF: C{self.alpha_imf + 1}")
            lines.append(f"active/inactive band power: {self.power_ratio:.2f}")
        return "\n".join(lines)


def alpha_study(
    stack: ImfStack,
    sample_rate: float,
    band: Tuple[float, float] = ALPHA_BAND,
    nperseg: int = 256,
    overlap: float = 0.5,
    active_fraction: float = 0.5,
) -> AlphaStudy:
    """
    Locate the IMF whose PSD peaks inside ``band`` and compare its band power
    in the leading ``active_fraction`` of the record with the remainder.

    An IMF counts for the band when the channel-summed PSD peaks inside it.
    """
    real = stack.to_real()
    split = int(real.length * active_fraction)
    peaks = np.zeros((real.m_imfs, real.n_channels))
    alpha_imfs = []
    for j in range(real.m_imfs):
        summed = None
        for i in range(real.n_channels):
            psd = psd_welch(real.imfs[j, i], sample_rate, nperseg, overlap)
            peaks[j, i] = peak_frequency(psd)
            summed = psd.power if summed is None else summed + psd.power
        combined = PsdEstimate(psd.frequencies, summed, psd.nperseg, psd.noverlap)
        if np.any(summed > 0) and band[0] <= peak_frequency(combined) <= band[1]:
            alpha_imfs.append(j)

    active = inactive = 0.0
    alpha_imf = alpha_imfs[0] if alpha_imfs else None
    if alpha_imf is not None:
        seg = min(nperseg, split, real.length - split)
        for i in range(real.n_channels):
            imf = real.imfs[alpha_imf, i]
            active += band_power(psd_welch(imf[:split], sample_rate, seg, overlap), *band)
            inactive += band_power(psd_welch(imf[split:], sample_rate, seg, overlap), *band)
    logger.debug("alpha IMFs %s", alpha_imfs)
    return AlphaStudy(peaks, alpha_imf, alpha_imfs, active, inactive)


# ---------------------------------------------------------------------------
# IMF conditions
# ---------------------------------------------------------------------------

CONDITION_FLOOR = 0.05


@dataclass
class ChannelCondition:
    channel: int
    extrema: int
    zero_crossings: int
    mean_deviation: float
    threshold: float = 0.0

    @property
    def difference(self) -> int:
        return abs(self.extrema - self.zero_crossings)

    @property
    def passed(self) -> bool:
        return self.difference <= 1


@dataclass
class ImfConditionReport:
    channels: List[ChannelCondition]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.channels)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "channel": c.channel + 1,
                "extrema": c.extrema,
                "zero_crossings": c.zero_crossings,
                "difference": c.difference,
                "threshold": c.threshold,
                "mean_deviation": c.mean_deviation,
                "passed": c.passed,
            }
            for c in self.channels
        ])

    def to_text(self) -> str:
        return self.to_frame().to_string(index=False)


def zero_crossings(x: np.ndarray, threshold: float = 0.0) -> int:
    """
    Sign changes of a Schmitt trigger at +/- ``threshold``: the state only
    flips once the signal reaches the opposite level. With a zero threshold
    exact zeros are folded into the preceding sign.
    """
    x = np.asarray(x, dtype=float)
    if threshold > 0:
        states = np.where(x >= threshold, 1, np.where(x <= -threshold, -1, 0))
    else:
        states = np.sign(x)
    held = states[states != 0]
    if len(held) < 2:
        return 0
    return int(np.count_nonzero(held[1:] != held[:-1]))


def hysteresis_extrema(x: np.ndarray, delta: float) -> int:
    """
    Count turning points that the signal leaves by at least ``delta``
    (maxima and minima together). The starting direction is taken without
    counting, so the first sample never qualifies. A zero ``delta`` counts
    strict-policy extrema.
    """
    x = np.asarray(x, dtype=float)
    if len(x) < 3:
        return 0
    if delta <= 0:
        return sum(len(extrema_indices(x, mode, STRICT)[0]) for mode in (MAXIMA, MINIMA))
    count = 0
    direction = 0
    mx = mn = x[0]
    for this in x[1:]:
        if this > mx:
            mx = this
        if this < mn:
            mn = this
        if direction == 0:
            if this <= mx - delta:
                direction, mn = -1, this
            elif this >= mn + delta:
                direction, mx = 1, this
        elif direction > 0:
            if this <= mx - delta:
                count += 1
                direction, mn = -1, this
        elif this >= mn + delta:
            count += 1
            direction, mx = 1, this
    return count


def _mean_deviation(x: np.ndarray) -> float:
    amplitude = np.max(np.abs(x))
    if amplitude == 0:
        return 0.0
    t = np.arange(len(x))
    envelopes = []
    for mode in (MAXIMA, MINIMA):
        idx, _ = extrema_indices(x, mode, STRICT)
        if len(idx) < 2:
            return 0.0
        envelopes.append(np.interp(t, idx, x[idx]))
    mean = 0.5 * (envelopes[0] + envelopes[1])
    return float(np.max(np.abs(mean)) / amplitude)


def imf_condition_check(
    imf: MultivariateSignal,
    reference: Optional[MultivariateSignal] = None,
    floor: float = CONDITION_FLOOR,
) -> ImfConditionReport:
    """
    Per channel: extrema count (both polarities), zero crossings, and the
    largest |(upper + lower) / 2| relative to the channel amplitude.

    Oscillations below ``floor`` times the channel's peak amplitude are not
    counted: zero crossings go through a Schmitt trigger at that level and an
    extremum must be left by twice that level. The peak is taken from the
    matching channel of ``reference`` (normally the decomposed input), or
    from the IMF itself when no reference is given or its channel is silent.
    A zero floor reduces both counts to their exact, strict-policy forms.
    """
    real = imf.to_real()
    ref = reference.to_real().samples if reference is not None else None
    if ref is not None and ref.shape[0] != real.n_channels:
        raise DegenerateInput(f"reference has {ref.shape[0]} channels, IMF has {real.n_channels}")
    channels = []
    for i in range(real.n_channels):
        x = real.samples[i]
        peak = float(np.max(np.abs(ref[i]))) if ref is not None and ref.shape[1] else 0.0
        if peak == 0 and len(x):
            peak = float(np.max(np.abs(x)))
        eps = floor * peak
        channels.append(ChannelCondition(
            i, hysteresis_extrema(x, 2 * eps), zero_crossings(x, eps), _mean_deviation(x), eps,
        ))
    return ImfConditionReport(channels)
