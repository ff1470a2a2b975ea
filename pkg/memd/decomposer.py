"""
IMF cascade: batch decomposition of a whole record and the streaming engine.

The streaming engine chains one SiftStage per (IMF, sifting iteration). Stage
outputs travel together with the IMF-stage input, so every IMF stage emits
imf = h and residue = input - h for the same sample positions. On the fixed
path the stages run in the guarded format; IMFs are rounded to Q16.8 on the
way out and the emitted residue is the input minus the rounded IMFs.
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from . import fixed_point as fx
from .directions import DirectionSet, direction_set
from .errors import ConfigError, DimensionMismatch, Flushed
from .signals import FIXED, ImfStack, MultivariateSignal
from .sifting import SiftConfig, SiftStage, extract_imf_samples, from_working, to_working

logger = logging.getLogger(__name__)

MIN_LENGTH = 16
DEFAULT_EMIT_CHUNK = 32


def _directions_for(n_channels: int, config: SiftConfig, dirs: Optional[DirectionSet]) -> DirectionSet:
    if dirs is None:
        return direction_set(n_channels, config.directions)
    if dirs.n_channels != n_channels:
        raise DimensionMismatch(
            f"signal has {n_channels} channels, directions have {dirs.n_channels}"
        )
    if dirs.n_directions != config.directions:
        raise ConfigError(
            f"config asks for {config.directions} directions, set has {dirs.n_directions}"
        )
    return dirs


def decompose(
    x: MultivariateSignal,
    m_imfs: int,
    config: SiftConfig,
    dirs: Optional[DirectionSet] = None,
    ctx: Optional[fx.ArithmeticContext] = None,
    recorder=None,
) -> ImfStack:
    """
    Extract ``m_imfs`` IMFs from a whole record.

    The input is converted to the configured arithmetic path. Stages that meet
    a residue leave zero IMFs behind; ``n_extracted`` counts the others.

    Raises:
        ConfigError: m_imfs < 1 or fewer than 16 samples.
    """
    if m_imfs < 1:
        raise ConfigError(f"m_imfs must be >= 1, got {m_imfs}")
    if x.length < MIN_LENGTH:
        raise ConfigError(f"decomposition needs at least {MIN_LENGTH} samples, got {x.length}")
    ctx = ctx if ctx is not None else fx.ArithmeticContext()
    x = x.to_path(config.path, ctx)
    dirs = _directions_for(x.n_channels, config, dirs)

    imfs = np.zeros((m_imfs,) + x.samples.shape, dtype=x.samples.dtype)
    work = to_working(x.samples, config.path)
    # fixed path: the emitted residue is the input minus the rounded IMFs
    remainder = x.samples
    stage_stats = []
    n_extracted = 0
    started = time.perf_counter()
    for j in range(m_imfs):
        stage_start = time.perf_counter()
        imf, next_work, info = extract_imf_samples(work, dirs, config, ctx)
        elapsed = time.perf_counter() - stage_start
        imf = from_working(imf, config.path, ctx)
        info.update({"imf": j + 1, "elapsed_s": round(elapsed, 6), "energy": _energy(imf, x.path)})
        stage_stats.append(info)
        if recorder is not None:
            recorder.record_step(
                step_name=f"imf_{j + 1}",
                step_type="imf_extraction",
                input_data={"samples": x.length, "channels": x.n_channels, "path": x.path},
                output_data=dict(info),
                reasoning=(
                    "input already a residue" if info["residue_reached"]
                    else f"{info['siftings_run']} sifting iterations"
                ),
            )
        if info["residue_reached"]:
            logger.info("IMF %d: residue reached, remaining IMFs are zero", j + 1)
            break
        imfs[j] = imf
        work = next_work
        if config.path == FIXED:
            remainder = fx.sub(remainder, imf, ctx)
        n_extracted += 1
        logger.debug("IMF %d extracted in %.3fs", j + 1, elapsed)
    residue = remainder if config.path == FIXED else work

    total = time.perf_counter() - started
    stats = {
        "elapsed_s": round(total, 6),
        "stages": stage_stats,
        "arithmetic": ctx.snapshot(),
    }
    echo = dict(asdict(config), m_imfs=m_imfs)
    if recorder is not None:
        recorder.add_metadata("config", echo)
        recorder.add_metadata("n_extracted", n_extracted)
        recorder.add_metadata("arithmetic", stats["arithmetic"])
    return ImfStack(
        imfs=imfs,
        residue=np.array(residue, copy=True),
        n_extracted=n_extracted,
        sample_rate=x.sample_rate,
        path=x.path,
        config=echo,
        stats=stats,
    )


def _energy(imf: np.ndarray, path: str) -> float:
    values = fx.to_real(imf) if path == FIXED else imf
    return float(np.mean(np.square(values)))


# ---------------------------------------------------------------------------
# Streaming
# ---------------------------------------------------------------------------

@dataclass
class StreamChunk:
    """Consecutive final samples of one IMF (imf_index == M is the residue)."""

    imf_index: int
    start: int
    values: np.ndarray

    def tuples(self) -> List[Tuple[int, int, np.ndarray]]:
        return [
            (self.imf_index, self.start + i, self.values[:, i].copy())
            for i in range(self.values.shape[1])
        ]


class StreamState:
    """
    Streaming decomposer: push samples in, get final IMF samples out.

    Output for every sample equals the batch decomposition of the whole record
    under the same configuration. Occupancy stays within
    M * S * (kmax + emit_chunk) samples.
    """

    def __init__(
        self,
        n_channels: int,
        m_imfs: int,
        config: SiftConfig,
        dirs: Optional[DirectionSet] = None,
        ctx: Optional[fx.ArithmeticContext] = None,
        emit_chunk: int = DEFAULT_EMIT_CHUNK,
        recorder=None,
    ):
        if m_imfs < 1:
            raise ConfigError(f"m_imfs must be >= 1, got {m_imfs}")
        self.n_channels = n_channels
        self.m_imfs = m_imfs
        self.config = config
        self.ctx = ctx if ctx is not None else fx.ArithmeticContext()
        self.dirs = _directions_for(n_channels, config, dirs)
        self.emit_chunk = emit_chunk
        self.recorder = recorder
        self.peak_occupancy = 0
        # the fixed path carries the stage input and the input-minus-IMFs remainder
        carry_rows = 2 * n_channels if config.path == FIXED else n_channels
        self.stages = [
            [
                SiftStage(self.dirs, config, self.ctx, emit_chunk, carry_rows)
                for _ in range(config.siftings)
            ]
            for _ in range(m_imfs)
        ]
        self.pushed = 0
        self.flushed = False
        self._dtype = np.int64 if config.path == FIXED else float

    def _coerce(self, block) -> np.ndarray:
        block = np.asarray(block)
        if block.ndim == 1:
            block = block[:, np.newaxis]
        if block.shape[0] != self.n_channels:
            raise DimensionMismatch(f"expected {self.n_channels} channels, got {block.shape[0]}")
        if self.config.path == FIXED and block.dtype.kind == "f":
            return fx.from_real(block, self.ctx)
        return block.astype(self._dtype, copy=False)

    def _cascade(self, block: np.ndarray, final: bool) -> List[StreamChunk]:
        out: List[StreamChunk] = []
        n = self.n_channels
        fixed = self.config.path == FIXED
        data = to_working(block, self.config.path)
        remainder = block
        start = 0
        for j, row in enumerate(self.stages):
            h = data
            carry = np.concatenate([data, remainder], axis=0) if fixed else data
            for stage in row:
                start, h, carry = stage.feed(h, carry)
                if final:
                    # the flush continues where the feed stopped
                    _, h_rest, carry_rest = stage.flush()
                    h = np.concatenate([h, h_rest], axis=1)
                    carry = np.concatenate([carry, carry_rest], axis=1)
            if fixed:
                imf = fx.narrow(h, self.ctx)
                data = fx.saturate_guarded(carry[:n] - h, self.ctx)
                remainder = fx.sub(carry[n:], imf, self.ctx)
            else:
                imf = h
                data = carry - h
            if imf.shape[1]:
                out.append(StreamChunk(j, start, imf))
        residue = remainder if fixed else data
        if residue.shape[1]:
            out.append(StreamChunk(self.m_imfs, start, residue))
        return out

    def push_block(self, block) -> List[StreamChunk]:
        """Feed an N x b block; returns the chunks it finalised."""
        if self.flushed:
            raise Flushed("stream already flushed")
        block = self._coerce(block)
        self.pushed += block.shape[1]
        chunks = self._cascade(block, final=False)
        self.peak_occupancy = max(self.peak_occupancy, self.occupancy())
        return chunks

    def push(self, sample) -> List[Tuple[int, int, np.ndarray]]:
        """Feed one N-vector; returns (imf_index, t, values) tuples."""
        chunks = self.push_block(np.asarray(sample).reshape(self.n_channels, 1))
        return [item for chunk in chunks for item in chunk.tuples()]

    def flush(self) -> List[StreamChunk]:
        """Treat the input as ended and emit everything still buffered."""
        if self.flushed:
            raise Flushed("stream already flushed")
        chunks = self._cascade(np.zeros((self.n_channels, 0), dtype=self._dtype), final=True)
        self.flushed = True
        logger.debug("stream flushed after %d samples", self.pushed)
        if self.recorder is not None:
            self.recorder.record_step(
                step_name="stream",
                step_type="stream_flush",
                input_data={"samples": self.pushed, "channels": self.n_channels, "path": self.config.path},
                output_data={"peak_occupancy": self.peak_occupancy, "occupancy_bound": self.occupancy_bound()},
                reasoning=f"{self.m_imfs} IMF stages, {self.config.siftings} sifts each",
            )
            self.recorder.add_metadata("config", dict(asdict(self.config), m_imfs=self.m_imfs))
        return chunks

    def occupancy(self) -> int:
        return sum(stage.buffered for row in self.stages for stage in row)

    def occupancy_bound(self) -> int:
        return self.m_imfs * self.config.siftings * (self.config.kmax + self.emit_chunk)


def stream_push(state: StreamState, sample) -> List[Tuple[int, int, np.ndarray]]:
    """
    Raises:
        Flushed: if the stream was already flushed.
    """
    return state.push(sample)


def stream_push_block(state: StreamState, block) -> List[StreamChunk]:
    """
    Feed an N x b block of samples in one call.

    Raises:
        Flushed: if the stream was already flushed.
    """
    return state.push_block(block)


def stream_flush(state: StreamState) -> List[Tuple[int, int, np.ndarray]]:
    """
    End the input and return every remaining (imf_index, t, values) tuple.

    Raises:
        Flushed: on a second flush; the state accepts no further samples.
    """
    return [item for chunk in state.flush() for item in chunk.tuples()]


Emitted = Union[StreamChunk, Tuple[int, int, np.ndarray]]


def collect_stream(
    outputs: Iterable[Emitted],
    n_channels: int,
    m_imfs: int,
    length: int,
    sample_rate: float = 1.0,
    path: str = "real",
) -> ImfStack:
    """Assemble streamed chunks or tuples into an ImfStack."""
    dtype = np.int64 if path == FIXED else float
    data = np.zeros((m_imfs + 1, n_channels, length), dtype=dtype)
    seen = np.zeros((m_imfs + 1, length), dtype=bool)
    for item in outputs:
        if isinstance(item, StreamChunk):
            stop = item.start + item.values.shape[1]
            data[item.imf_index, :, item.start:stop] = item.values
            seen[item.imf_index, item.start:stop] = True
        else:
            j, t, values = item
            data[j, :, t] = values
            seen[j, t] = True
    missing = int((~seen).sum())
    if missing:
        logger.warning("%d (imf, sample) positions never emitted", missing)
    n_extracted = int(sum(np.any(data[j] != 0) for j in range(m_imfs)))
    return ImfStack(
        imfs=data[:m_imfs],
        residue=data[m_imfs],
        n_extracted=n_extracted,
        sample_rate=sample_rate,
        path=path,
    )


def stream_decompose(
    x: MultivariateSignal,
    m_imfs: int,
    config: SiftConfig,
    block: int = 1,
    dirs: Optional[DirectionSet] = None,
    ctx: Optional[fx.ArithmeticContext] = None,
    emit_chunk: int = DEFAULT_EMIT_CHUNK,
    recorder=None,
) -> Tuple[ImfStack, int]:
    """
    Run a whole record through a StreamState in blocks of ``block`` samples.

    Returns the collected stack and the peak occupancy seen between pushes.
    """
    ctx = ctx if ctx is not None else fx.ArithmeticContext()
    x = x.to_path(config.path, ctx)
    state = StreamState(x.n_channels, m_imfs, config, dirs, ctx, emit_chunk, recorder)
    chunks: List[StreamChunk] = []
    for start in range(0, x.length, block):
        chunks.extend(stream_push_block(state, x.samples[:, start:start + block]))
    peak = state.peak_occupancy
    chunks.extend(state.flush())
    stack = collect_stream(chunks, x.n_channels, m_imfs, x.length, x.sample_rate, x.path)
    stack.config = dict(asdict(config), m_imfs=m_imfs)
    stack.stats = {"peak_occupancy": peak, "arithmetic": ctx.snapshot()}
    return stack, peak
