"""
Run configuration for the decomposer.
Supports several sources: a dictionary, a JSON file, or a key,value CSV file.
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .errors import ConfigError
from .extrema import INCLUSIVE
from .signals import REAL
from .sifting import (
    CUBIC,
    DEFAULT_KMAX,
    DEFAULT_SUPPORT,
    MEAN_2K,
    MIRROR,
    WINDOWED,
    SiftConfig,
)

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """
    Everything a decomposition run needs besides the samples.

    Sifting parameters are validated through SiftConfig; the rest covers the
    input (channels, sample_rate), synthesis (seed) and spectral analysis.
    """

    channels: int = 4
    directions: int = 8
    siftings: int = 4
    imfs: int = 4
    path: str = REAL
    envelope: str = CUBIC
    spline_window: str = WINDOWED
    mean_mode: str = MEAN_2K
    tie_policy: str = INCLUSIVE
    boundary: str = MIRROR
    kmax: int = DEFAULT_KMAX
    support: int = DEFAULT_SUPPORT
    sample_rate: float = 1.0
    seed: int = 0
    welch_nperseg: int = 256
    welch_overlap: float = 0.5

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            ConfigError: on any out-of-range or unknown setting.
        """
        if self.channels < 2:
            raise ConfigError(f"channels must be >= 2, got {self.channels}")
        if self.imfs < 1:
            raise ConfigError(f"imfs must be >= 1, got {self.imfs}")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if self.welch_nperseg < 8:
            raise ConfigError("welch_nperseg must be >= 8")
        if not 0.0 <= self.welch_overlap < 1.0:
            raise ConfigError("welch_overlap must lie in [0, 1)")
        self.sift_config()

    def sift_config(self) -> SiftConfig:
        return SiftConfig(
            directions=self.directions,
            siftings=self.siftings,
            boundary=self.boundary,
            tie_policy=self.tie_policy,
            envelope=self.envelope,
            path=self.path,
            spline_window=self.spline_window,
            mean_mode=self.mean_mode,
            kmax=self.kmax,
            support=self.support,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def updated(self, **changes) -> "RunConfig":
        """Copy with ``changes`` applied; None values are ignored."""
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **_coerce(changes))

    @classmethod
    def load(cls, source: Optional[Union[str, Path, Dict[str, Any]]] = None) -> "RunConfig":
        """
        Build a configuration from a source.

        Args:
            source: Can be:
                - None: defaults
                - Dictionary of settings
                - Path to a JSON file (an object, or {"config": {...}})
                - Path to a CSV file with key,value rows

        Raises:
            ConfigError: missing file, unreadable content, or invalid settings.
        """
        if source is None:
            return cls()
        kind = _detect_source_type(source)
        if kind == "dict":
            data = dict(source)
        elif kind == "json":
            data = _load_json(Path(source))
        else:
            data = _load_csv(Path(source))
        return cls(**_coerce(data))


def _detect_source_type(source) -> str:
    if isinstance(source, dict):
        return "dict"
    if str(source).lower().endswith(".json"):
        return "json"
    return "csv"


def _load_json(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"could not parse {path}: {e}") from e
    if isinstance(data, dict) and isinstance(data.get("config"), dict):
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return data


def _load_csv(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    data: Dict[str, Any] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            if row[0].strip() == "key":
                continue
            if len(row) < 2:
                raise ConfigError(f"{path}: row {row!r} needs a key and a value")
            data[row[0].strip()] = row[1].strip()
    return data


def _coerce(data: Dict[str, Any]) -> Dict[str, Any]:
    """Convert string values to each field's type and drop unknown keys."""
    types = {f.name: f.type for f in fields(RunConfig)}
    out: Dict[str, Any] = {}
    for key, value in data.items():
        if key not in types:
            logger.warning("ignoring unknown config key %r", key)
            continue
        kind = types[key]
        kind = kind if isinstance(kind, type) else {"int": int, "float": float, "str": str}[kind]
        try:
            if kind is int:
                number = float(value)
                if not number.is_integer():
                    raise ValueError(f"{value!r} is not an integer")
                value = int(number)
            else:
                value = kind(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"config key {key!r}: {e}") from e
        out[key] = value
    return out
