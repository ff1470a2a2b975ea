"""Shared fixtures: small multichannel tone mixtures and storage backends."""

import numpy as np
import pytest

from memd.sifting import SiftConfig
from memd.signals import MultivariateSignal
from memd.storage import InMemoryStorage
from memd.storage_sqlite import SQLiteStorage
from memd.synth import synth_gen

# every channel carries the fastest tone so each projection keeps extrema
MIXTURE_TONES = [[7.0, 41.0, 113.0], [7.0, 113.0], [19.0, 41.0, 113.0], [7.0, 19.0, 113.0]]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mixture():
    """4 channels x 700 samples at 1 kHz."""
    return synth_gen(MIXTURE_TONES, amplitude=10.0, sample_rate=1000.0, length=700)


@pytest.fixture
def small_config():
    return SiftConfig(directions=4, siftings=2)


@pytest.fixture
def ramp():
    t = np.arange(64, dtype=float)
    return MultivariateSignal(np.vstack([t, 2.0 * t + 1.0]), 1.0)


@pytest.fixture
def memory_storage():
    return InMemoryStorage()


@pytest.fixture
def sqlite_storage(tmp_path):
    return SQLiteStorage(str(tmp_path / "runs.db"))
