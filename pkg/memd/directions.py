"""
Direction vectors on the (N-1)-sphere from the Hammersley point set.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ConfigError
from .fixed_point import WIDE_FRAC_BITS, CsdConstant

logger = logging.getLogger(__name__)

DEFAULT_DIRECTIONS = 8


def first_primes(count: int) -> List[int]:
    primes: List[int] = []
    candidate = 2
    while len(primes) < count:
        if all(candidate % p for p in primes if p * p <= candidate):
            primes.append(candidate)
        candidate += 1
    return primes


def radical_inverse(index: int, base: int) -> float:
    """Digits of ``index`` in ``base`` mirrored about the radix point."""
    if index < 0:
        raise ValueError("index must be non-negative")
    result = 0.0
    weight = 1.0 / base
    while index > 0:
        index, digit = divmod(index, base)
        result += digit * weight
        weight /= base
    return result


def hammersley_point(index: int, count: int, dim: int) -> np.ndarray:
    """
    Point ``index`` of a ``count``-point Hammersley set in [0, 1)^dim.

    Coordinate 0 is index/count; coordinate j >= 1 is the radical inverse of
    index in the j-th prime base (2, 3, 5, ...).
    """
    if not 0 <= index < count:
        raise ValueError(f"index {index} outside [0, {count})")
    point = np.empty(dim)
    point[0] = index / count
    for j, base in enumerate(first_primes(max(dim - 1, 0)), start=1):
        point[j] = radical_inverse(index, base)
    return point


def _sphere_from_cube(point: np.ndarray) -> np.ndarray:
    """
    Hyperspherical map: the first cube coordinate sets the final angle in
    [0, 2*pi), the remaining ones set the polar angles in [0, pi).
    """
    dim = len(point)
    angles = np.empty(dim)
    angles[-1] = 2.0 * np.pi * point[0]
    angles[:-1] = np.pi * point[1:]

    n = dim + 1
    vec = np.empty(n)
    sin_prod = 1.0
    for j in range(dim):
        vec[j] = sin_prod * np.cos(angles[j])
        sin_prod *= np.sin(angles[j])
    vec[n - 1] = sin_prod
    return vec


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """K unit vectors in N-space (rows) with their CSD-quantised coefficients."""

    n_channels: int
    n_directions: int
    vectors: np.ndarray
    quantized: Tuple[Tuple[CsdConstant, ...], ...]

    @classmethod
    def from_vectors(cls, vectors: np.ndarray, frac_bits: int = WIDE_FRAC_BITS) -> "DirectionSet":
        vectors = np.array(vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[1] < 2:
            raise ConfigError("direction vectors must be a K x N matrix with N >= 2")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ConfigError("direction vectors must have unit norm")
        vectors.setflags(write=False)
        quantized = tuple(
            tuple(CsdConstant.from_real(float(c), frac_bits) for c in row) for row in vectors
        )
        return cls(
            n_channels=vectors.shape[1],
            n_directions=vectors.shape[0],
            vectors=vectors,
            quantized=quantized,
        )

    @property
    def coeff_raw(self) -> np.ndarray:
        """K x N integer numerators of the quantised coefficients."""
        return np.array([[c.raw for c in row] for row in self.quantized], dtype=np.int64)

    @property
    def frac_bits(self) -> int:
        return self.quantized[0][0].frac_bits

    def min_pairwise_angle(self) -> float:
        return min_pairwise_angle(self.vectors)

    def to_csv(self, path: Union[str, Path]) -> None:
        columns = [f"a{i + 1}" for i in range(self.n_channels)]
        frame = pd.DataFrame(self.vectors, columns=columns)
        frame.index.name = "direction"
        frame.to_csv(path, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "DirectionSet":
        frame = pd.read_csv(path, index_col=0)
        return cls.from_vectors(frame.to_numpy(dtype=float))


def min_pairwise_angle(vectors: np.ndarray) -> float:
    vectors = np.asarray(vectors, dtype=float)
    if len(vectors) < 2:
        return float("pi")
    cosines = np.clip(vectors @ vectors.T, -1.0, 1.0)
    upper = np.triu_indices(len(vectors), k=1)
    return float(np.min(np.arccos(cosines[upper])))


@lru_cache(maxsize=32)
def direction_set(n_channels: int, n_directions: int = DEFAULT_DIRECTIONS) -> DirectionSet:
    """
    Quasi-uniform direction set for ``n_channels``-variate signals.

    Raises:
        ConfigError: if n_channels < 2 or n_directions < 1.
    """
    if n_channels < 2:
        raise ConfigError(f"direction set needs at least 2 channels, got {n_channels}")
    if n_directions < 1:
        raise ConfigError(f"direction count must be positive, got {n_directions}")

    dim = n_channels - 1
    vectors = np.array(
        [_sphere_from_cube(hammersley_point(k, n_directions, dim)) for k in range(n_directions)]
    )
    logger.debug("built %d directions for %d channels", n_directions, n_channels)
    return DirectionSet.from_vectors(vectors)


def random_direction_sets(
    n_channels: int, n_directions: int, count: int, seed: int = 0
) -> Sequence[np.ndarray]:
    """Uniformly random direction sets, the baseline for quasi-uniformity checks."""
    rng = np.random.default_rng(seed)
    sets = []
    for _ in range(count):
        g = rng.standard_normal((n_directions, n_channels))
        sets.append(g / np.linalg.norm(g, axis=1, keepdims=True))
    return sets
