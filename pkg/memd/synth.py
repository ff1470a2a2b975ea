"""
Synthetic test signals: tone mixtures and the named presets used by
``validate`` and ``bench``.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, NyquistViolation
from .signals import MultivariateSignal

logger = logging.getLogger(__name__)

QUADTONE_AMPLITUDE = 150.0
QUADTONE_TONES = (50e3, 150e3, 350e3, 800e3)
QUADTONE_RATE = 30e6
QUADTONE_LENGTH = 6000
# tone numbers (1-based) present on each channel
QUADTONE_CHANNELS = ((1, 3, 4), (1, 3), (2, 3, 4), (1, 2, 3))

ALPHA_RATE = 250.0
ALPHA_SECONDS = 10.0


def tone(frequency: float, amplitude: float, sample_rate: float, length: int, phase: float = 0.0) -> np.ndarray:
    t = np.arange(length) / sample_rate
    return amplitude * np.sin(2.0 * np.pi * frequency * t + phase)


def synth_gen(
    channel_tones: Sequence[Sequence[float]],
    amplitude: float = 1.0,
    sample_rate: float = 1.0,
    length: int = 1024,
    noise: float = 0.0,
    seed: int = 0,
) -> MultivariateSignal:
    """
    Sum of equal-amplitude sines per channel, optionally with seeded white noise.

    An empty tone list gives a zero channel.

    Raises:
        NyquistViolation: if a tone is not below half the sample rate.
        ConfigError: on a non-positive length or sample rate.
    """
    if length < 1:
        raise ConfigError(f"length must be positive, got {length}")
    if sample_rate <= 0:
        raise ConfigError("sample_rate must be positive")
    nyquist = sample_rate / 2.0
    samples = np.zeros((len(channel_tones), length))
    for i, tones in enumerate(channel_tones):
        for f in tones:
            if not 0 <= f < nyquist:
                raise NyquistViolation(f"tone {f:g} Hz on channel {i + 1} is not below Nyquist {nyquist:g} Hz")
            samples[i] += tone(f, amplitude, sample_rate, length)
    if noise > 0:
        samples += noise * np.random.default_rng(seed).standard_normal(samples.shape)
    return MultivariateSignal(samples, sample_rate)


@dataclass
class Preset:
    """A named signal plus the ground truth each IMF is compared against."""

    name: str
    signal: MultivariateSignal
    truths: List[np.ndarray] = field(default_factory=list)
    truth_labels: List[str] = field(default_factory=list)
    description: str = ""


def quadtone(length: int = QUADTONE_LENGTH, seed: int = 0) -> Preset:
    """
    Four channels mixing four tones (50/150/350/800 kHz at 30 MHz); the 350 kHz
    tone is common to every channel. Truth j is the tone expected in IMF j,
    highest frequency first.
    """
    channels = [[QUADTONE_TONES[k - 1] for k in ks] for ks in QUADTONE_CHANNELS]
    signal = synth_gen(channels, QUADTONE_AMPLITUDE, QUADTONE_RATE, length)
    truths = [tone(f, QUADTONE_AMPLITUDE, QUADTONE_RATE, length) for f in reversed(QUADTONE_TONES)]
    labels = [f"f{k} = {f / 1e3:g} kHz" for k, f in reversed(list(enumerate(QUADTONE_TONES, start=1)))]
    return Preset("quadtone", signal, truths, labels, "four-tone mixture, 350 kHz common to all channels")


def alpha_surrogate(length: Optional[int] = None, seed: int = 0) -> Preset:
    """
    EEG-like surrogate at 250 Hz: a 10 Hz burst in the first half only, a 24 Hz
    and a 2 Hz background rhythm, and small seeded noise.
    """
    length = length or int(ALPHA_RATE * ALPHA_SECONDS)
    t = np.arange(length) / ALPHA_RATE
    rng = np.random.default_rng(seed)
    gains = np.array([1.0, 0.8, 0.6, 0.4])
    active = (np.arange(length) < length // 2).astype(float)
    alpha = 20.0 * np.sin(2 * np.pi * 10.0 * t) * active
    samples = np.empty((len(gains), length))
    for i, gain in enumerate(gains):
        beta = 12.0 * np.sin(2 * np.pi * 24.0 * t + 0.7 * i)
        delta = 15.0 * np.sin(2 * np.pi * 2.0 * t + 0.3 * i)
        samples[i] = gain * alpha + beta + delta + 0.5 * rng.standard_normal(length)
    truth = np.vstack([gain * alpha for gain in gains])
    return Preset(
        "alpha-surrogate",
        MultivariateSignal(samples, ALPHA_RATE),
        [truth],
        ["alpha burst"],
        "10 Hz burst in the first half over 24 Hz and 2 Hz rhythms",
    )


PRESETS: Dict[str, Callable[..., Preset]] = {
    "quadtone": quadtone,
    "alpha-surrogate": alpha_surrogate,
}
ALIASES = {"paper-quadtone": "quadtone"}


def preset_names() -> List[str]:
    return sorted(PRESETS) + sorted(ALIASES)


def load_preset(name: str, length: Optional[int] = None, seed: int = 0) -> Preset:
    """
    Raises:
        ConfigError: unknown preset name.
    """
    key = ALIASES.get(name, name)
    if key not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}")
    logger.debug("building preset %s", key)
    if length is None:
        return PRESETS[key](seed=seed)
    return PRESETS[key](length=length, seed=seed)
