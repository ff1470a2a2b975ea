"""
Signal ingestion and artifact writing.

Text input is decoded with chardet's guess first and common encodings after,
then parsed with pandas. Artifact CSVs start with ``# key: value`` comment
lines (artifact kind, config echo, fixed-point scale, sample rate) followed by
a ``t,ch1,...,chN`` table.
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import chardet
import numpy as np
import pandas as pd

from . import fixed_point as fx
from .errors import ParseError, RaggedRows
from .signals import FIXED, REAL, ImfStack, MultivariateSignal

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FALLBACK_ENCODINGS = ("utf-8-sig", "utf-8", "latin-1")


def decode_bytes(contents: bytes) -> str:
    """Decode text with the detected encoding when chardet is confident."""
    encodings: List[str] = []
    detected = chardet.detect(contents[:10000])
    if detected and detected.get("encoding") and detected.get("confidence", 0) > 0.7:
        encodings.append(detected["encoding"])
    encodings.extend(FALLBACK_ENCODINGS)
    for encoding in encodings:
        try:
            text = contents.decode(encoding)
        except (UnicodeDecodeError, LookupError):
            continue
        return text.lstrip("\ufeff")
    return contents.decode("utf-8", errors="replace")


def _split_comments(text: str) -> Tuple[Dict[str, str], List[Tuple[int, str]]]:
    meta: Dict[str, str] = {}
    rows: List[Tuple[int, str]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, sep, value = stripped[1:].partition(":")
            if sep:
                meta[key.strip()] = value.strip()
            continue
        rows.append((number, stripped))
    return meta, rows


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def parse_csv_text(text: str, source: str = "<input>") -> MultivariateSignal:
    """
    Parse CSV text whose first column is time and remaining columns channels.

    Raises:
        ParseError: empty input, fewer than two columns, or a non-finite cell
            (row and column are 1-based positions in the file).
        RaggedRows: rows with differing field counts.
    """
    meta, rows = _split_comments(text)
    if not rows:
        raise ParseError(f"{source}: no data rows")

    first_line, first = rows[0]
    width = len(first.split(","))
    header = not all(_is_number(c.strip()) for c in first.split(","))
    for number, line in rows:
        fields = len(line.split(","))
        if fields != width:
            raise RaggedRows(f"{source}: expected {width} fields, got {fields}", row=number)
    if width < 2:
        raise ParseError(f"{source}: need a time column and at least one channel", row=first_line)
    data_rows = rows[1:] if header else rows
    if not data_rows:
        raise ParseError(f"{source}: header without data rows", row=first_line)

    frame = pd.read_csv(
        io.StringIO("\n".join(line for _, line in data_rows)),
        header=None,
        dtype=str,
        skipinitialspace=True,
    )
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ParseError(
            f"{source}: non-numeric or non-finite cell {frame.iat[r, c]!r}",
            row=data_rows[r][0],
            column=int(c) + 1,
        )

    times = values[:, 0]
    samples = values[:, 1:].T
    sample_rate = _sample_rate(meta, times)
    if "scale" in meta:
        scale = float(meta["scale"])
        if scale != fx.SCALE:
            raise ParseError(f"{source}: unsupported fixed-point scale {meta['scale']}")
        if not np.all(samples == np.round(samples)):
            raise ParseError(f"{source}: fixed-point samples must be raw integers")
        return MultivariateSignal(samples.astype(np.int64), sample_rate, FIXED)
    return MultivariateSignal(samples, sample_rate, REAL)


def _sample_rate(meta: Dict[str, str], times: np.ndarray) -> float:
    if "sample_rate" in meta:
        return float(meta["sample_rate"])
    if len(times) >= 2:
        steps = np.diff(times)
        if steps[0] > 0 and np.allclose(steps, steps[0], rtol=1e-6):
            return float(1.0 / steps[0])
    return 1.0


def read_csv(path: PathLike) -> MultivariateSignal:
    """
    Read a signal CSV (header ``t,ch1,...`` optional).

    Raises:
        FileNotFoundError, ParseError, RaggedRows
    """
    path = Path(path)
    contents = path.read_bytes()
    if not contents.strip():
        raise ParseError(f"{path}: file is empty")
    return parse_csv_text(decode_bytes(contents), str(path))


def frame_to_signal(frame: pd.DataFrame, source: str = "<frame>", sample_rate: Optional[float] = None) -> MultivariateSignal:
    """First column is time, the rest are channels."""
    if frame.empty or frame.shape[1] < 2:
        raise ParseError(f"{source}: need a time column and at least one channel")
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ParseError(f"{source}: non-numeric or non-finite cell", row=int(r) + 2, column=int(c) + 1)
    rate = sample_rate if sample_rate is not None else _sample_rate({}, values[:, 0])
    return MultivariateSignal(values[:, 1:].T, rate)


def read_upload(contents: bytes, filename: str) -> MultivariateSignal:
    """Parse uploaded bytes by extension (.csv/.txt, .xlsx/.xls, .json)."""
    if not contents.strip():
        raise ParseError(f"{filename}: file is empty")
    suffix = Path(filename).suffix.lower()
    if suffix in (".csv", ".txt", ""):
        return parse_csv_text(decode_bytes(contents), filename)
    if suffix in (".xlsx", ".xls"):
        return frame_to_signal(pd.read_excel(io.BytesIO(contents)), filename)
    if suffix == ".json":
        try:
            frame = pd.read_json(io.StringIO(decode_bytes(contents)))
        except ValueError as e:
            raise ParseError(f"{filename}: {e}") from e
        return frame_to_signal(frame, filename)
    raise ParseError(f"unsupported file type: {suffix}")


def read_signal(path: PathLike) -> MultivariateSignal:
    path = Path(path)
    if path.suffix.lower() in (".csv", ".txt"):
        return read_csv(path)
    return read_upload(path.read_bytes(), path.name)


def write_csv(
    path: PathLike,
    signal: MultivariateSignal,
    artifact: str = "signal",
    config: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Write a signal with its provenance header. Fixed-path samples are written
    as raw Q16.8 integers with a ``scale`` line; real samples with 17
    significant digits.
    """
    path = Path(path)
    lines = [f"# artifact: {artifact}"]
    if config is not None:
        lines.append(f"# config: {json.dumps(config, sort_keys=True)}")
    if signal.path == FIXED:
        lines.append(f"# scale: {fx.SCALE}")
    lines.append(f"# sample_rate: {float(signal.sample_rate)!r}")

    frame = pd.DataFrame(
        signal.samples.T,
        columns=[f"ch{i + 1}" for i in range(signal.n_channels)],
    )
    frame.insert(0, "t", np.arange(signal.length) / signal.sample_rate)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")
        frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    return path


def write_stack(out_dir: PathLike, stack: ImfStack, config: Optional[Dict[str, Any]] = None) -> List[Path]:
    """One CSV per IMF, one for the residue, and a JSON config echo."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = config if config is not None else stack.config
    written = []
    for j in range(stack.m_imfs):
        written.append(write_csv(out_dir / f"imf_{j + 1}.csv", stack.imf(j), f"imf {j + 1}", config))
    written.append(write_csv(out_dir / "residue.csv", stack.residue_signal(), "residue", config))
    echo = out_dir / "config.json"
    echo.write_text(
        json.dumps({"config": config, "n_extracted": stack.n_extracted}, indent=2, sort_keys=True),
        encoding="utf-8",
    )
    written.append(echo)
    logger.info("wrote %d artifacts to %s", len(written), out_dir)
    return written
