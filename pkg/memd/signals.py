"""
Signal containers shared by both arithmetic paths.

Real-path samples are float64; fixed-path samples are Q16.8 raw integers in int64.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

import numpy as np

from . import fixed_point as fx
from .errors import ConfigError

REAL = "real"
FIXED = "fixed"
PATHS = (REAL, FIXED)


@dataclass
class MultivariateSignal:
    """N channels x T samples with sample-rate metadata."""

    samples: np.ndarray
    sample_rate: float = 1.0
    path: str = REAL

    def __post_init__(self):
        if self.path not in PATHS:
            raise ConfigError(f"unknown arithmetic path {self.path!r}")
        dtype = np.int64 if self.path == FIXED else float
        self.samples = np.asarray(self.samples, dtype=dtype)
        if self.samples.ndim == 1:
            self.samples = self.samples[np.newaxis, :]
        if self.samples.ndim != 2:
            raise ConfigError("samples must be a channels x time matrix")
        if self.path == REAL and not np.all(np.isfinite(self.samples)):
            raise ConfigError("samples must be finite")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    def channel(self, i: int) -> np.ndarray:
        return self.samples[i]

    def with_samples(self, samples: np.ndarray) -> "MultivariateSignal":
        return replace(self, samples=samples)

    def to_real(self) -> "MultivariateSignal":
        if self.path == REAL:
            return self
        return MultivariateSignal(fx.to_real(self.samples), self.sample_rate, REAL)

    def to_fixed(self, ctx: Optional[fx.ArithmeticContext] = None) -> "MultivariateSignal":
        if self.path == FIXED:
            return self
        return MultivariateSignal(fx.from_real(self.samples, ctx), self.sample_rate, FIXED)

    def to_path(self, path: str, ctx: Optional[fx.ArithmeticContext] = None) -> "MultivariateSignal":
        return self.to_fixed(ctx) if path == FIXED else self.to_real()


@dataclass
class ImfStack:
    """
    M IMFs plus the residue, index-aligned with the input.

    Stages that ended early on a residue hold zero IMFs; ``n_extracted`` counts
    the real ones.
    """

    imfs: np.ndarray
    residue: np.ndarray
    n_extracted: int
    sample_rate: float = 1.0
    path: str = REAL
    config: Dict[str, Any] = field(default_factory=dict)
    stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def m_imfs(self) -> int:
        return self.imfs.shape[0]

    @property
    def n_channels(self) -> int:
        return self.residue.shape[0]

    @property
    def length(self) -> int:
        return self.residue.shape[1]

    def imf(self, j: int) -> MultivariateSignal:
        return MultivariateSignal(self.imfs[j], self.sample_rate, self.path)

    def residue_signal(self) -> MultivariateSignal:
        return MultivariateSignal(self.residue, self.sample_rate, self.path)

    def reconstruct(self) -> np.ndarray:
        return self.imfs.sum(axis=0) + self.residue

    def to_real(self) -> "ImfStack":
        if self.path == REAL:
            return self
        return replace(
            self,
            imfs=fx.to_real(self.imfs),
            residue=fx.to_real(self.residue),
            path=REAL,
        )
