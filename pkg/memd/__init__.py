"""
memd - streaming multivariate empirical mode decomposition.

Batch and block-streaming decomposition of multichannel signals into IMFs,
on a float64 path or a bit-exact Q16.8 fixed-point path.
"""

from .config import RunConfig
from .core import RunRecorder
from .decomposer import StreamState, collect_stream, decompose, stream_decompose
from .directions import DirectionSet, direction_set
from .errors import MemdError
from .signals import FIXED, REAL, ImfStack, MultivariateSignal
from .sifting import SiftConfig, extract_imf
from .storage import InMemoryStorage, StorageBackend
from .storage_sqlite import SQLiteStorage

__version__ = "0.1.0"

__all__ = [
    'RunConfig',
    'RunRecorder',
    'StreamState',
    'collect_stream',
    'decompose',
    'stream_decompose',
    'DirectionSet',
    'direction_set',
    'MemdError',
    'FIXED',
    'REAL',
    'ImfStack',
    'MultivariateSignal',
    'SiftConfig',
    'extract_imf',
    'InMemoryStorage',
    'StorageBackend',
    'SQLiteStorage',
]
