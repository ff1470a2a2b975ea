import numpy as np
import pytest

from memd import fixed_point as fx
from memd.core import RunRecorder
from memd.decomposer import (
    StreamChunk,
    StreamState,
    collect_stream,
    decompose,
    stream_decompose,
    stream_flush,
    stream_push,
    stream_push_block,
)
from memd.directions import direction_set
from memd.errors import ConfigError, DimensionMismatch, Flushed
from memd.sifting import SiftConfig
from memd.signals import MultivariateSignal


def test_real_reconstruction(mixture, small_config):
    stack = decompose(mixture, 3, small_config)
    assert stack.imfs.shape == (3, 4, 700)
    np.testing.assert_allclose(stack.reconstruct(), mixture.samples, atol=1e-9)
    assert stack.n_extracted == 3
    assert stack.config["m_imfs"] == 3


def test_fixed_reconstruction_is_exact(mixture):
    config = SiftConfig(directions=4, siftings=2, path="fixed")
    ctx = fx.ArithmeticContext()
    stack = decompose(mixture, 2, config, ctx=ctx)
    assert stack.imfs.dtype == np.int64
    assert not ctx.overflow
    np.testing.assert_array_equal(stack.reconstruct(), fx.from_real(mixture.samples))
    assert stack.stats["arithmetic"]["overflow"] is False


def test_invalid_requests(mixture, small_config):
    with pytest.raises(ConfigError):
        decompose(mixture, 0, small_config)
    short = MultivariateSignal(mixture.samples[:, :15])
    with pytest.raises(ConfigError):
        decompose(short, 2, small_config)
    with pytest.raises(DimensionMismatch):
        decompose(mixture, 2, small_config, dirs=direction_set(3, 4))
    with pytest.raises(ConfigError):
        decompose(mixture, 2, small_config, dirs=direction_set(4, 8))


def test_residue_input_yields_no_imfs(ramp):
    stack = decompose(ramp, 3, SiftConfig(directions=4))
    assert stack.n_extracted == 0
    assert not stack.imfs.any()
    np.testing.assert_array_equal(stack.residue, ramp.samples)


def test_recorder_collects_stage_steps(mixture, small_config, memory_storage):
    with RunRecorder(name="mixture", storage=memory_storage) as recorder:
        decompose(mixture, 2, small_config, recorder=recorder)
    run = memory_storage.get_run(recorder.run_id)
    assert [s["name"] for s in run["steps"]] == ["imf_1", "imf_2"]
    assert run["steps"][0]["type"] == "imf_extraction"
    assert run["steps"][0]["output"]["siftings_run"] == 2
    assert run["metadata"]["n_extracted"] == 2
    assert run["metadata"]["config"]["directions"] == 4


@pytest.mark.parametrize("block", [1, 7, 64])
@pytest.mark.parametrize("path", ["real", "fixed"])
def test_stream_equals_batch(mixture, block, path):
    config = SiftConfig(directions=4, siftings=2, path=path)
    batch = decompose(mixture, 2, config)
    streamed, _ = stream_decompose(mixture, 2, config, block=block)
    np.testing.assert_array_equal(streamed.imfs, batch.imfs)
    np.testing.assert_array_equal(streamed.residue, batch.residue)
    assert streamed.n_extracted == batch.n_extracted


@pytest.mark.parametrize("kmax", [3, 12, 40])
def test_stream_equals_batch_with_short_lookahead(mixture, kmax):
    config = SiftConfig(directions=4, siftings=2, kmax=kmax)
    batch = decompose(mixture, 2, config)
    streamed, _ = stream_decompose(mixture, 2, config, block=5)
    np.testing.assert_array_equal(streamed.imfs, batch.imfs)
    np.testing.assert_array_equal(streamed.residue, batch.residue)


def test_stream_occupancy_stays_bounded(mixture):
    config = SiftConfig(directions=4, siftings=2, kmax=20)
    state = StreamState(4, 2, config, emit_chunk=8)
    bound = state.occupancy_bound()
    assert bound == 2 * 2 * (20 + 8)
    for start in range(0, mixture.length, 3):
        state.push_block(mixture.samples[:, start:start + 3])
        assert state.occupancy() <= bound
    assert state.peak_occupancy <= bound
    state.flush()
    assert state.occupancy() == 0


def test_sample_tuples_match_block_output(mixture, small_config):
    x = MultivariateSignal(mixture.samples[:, :300], mixture.sample_rate)
    state = StreamState(4, 2, small_config)
    tuples = []
    for t in range(x.length):
        tuples.extend(stream_push(state, x.samples[:, t]))
    tuples.extend(stream_flush(state))
    assert all(0 <= j <= 2 for j, _, _ in tuples)
    assert len(tuples) == 3 * x.length
    from_tuples = collect_stream(tuples, 4, 2, x.length, x.sample_rate)
    from_blocks, _ = stream_decompose(x, 2, small_config, block=50)
    np.testing.assert_array_equal(from_tuples.imfs, from_blocks.imfs)
    np.testing.assert_array_equal(from_tuples.residue, from_blocks.residue)


def test_residue_chunks_use_last_index(mixture, small_config):
    state = StreamState(4, 2, small_config)
    chunks = state.push_block(mixture.samples) + state.flush()
    assert all(isinstance(c, StreamChunk) for c in chunks)
    assert {c.imf_index for c in chunks} == {0, 1, 2}
    emitted = sum(c.values.shape[1] for c in chunks if c.imf_index == 2)
    assert emitted == mixture.length


def test_push_after_flush_raises(small_config):
    state = StreamState(4, 1, small_config)
    state.flush()
    with pytest.raises(Flushed):
        state.push(np.zeros(4))
    with pytest.raises(Flushed):
        state.flush()


def test_stream_rejects_wrong_channel_count(small_config):
    state = StreamState(4, 1, small_config)
    with pytest.raises(DimensionMismatch):
        state.push_block(np.zeros((3, 5)))
    with pytest.raises(ConfigError):
        StreamState(4, 0, small_config)


def test_stream_flush_records_occupancy(mixture, small_config, memory_storage):
    with RunRecorder(name="stream", storage=memory_storage) as recorder:
        stack, peak = stream_decompose(mixture, 2, small_config, block=16, recorder=recorder)
    step = memory_storage.get_run(recorder.run_id)["steps"][-1]
    assert step["type"] == "stream_flush"
    assert step["output"]["peak_occupancy"] == peak
    assert stack.stats["peak_occupancy"] == peak


def test_reconstruction_fuzz(rng):
    config = SiftConfig(directions=4, siftings=1)
    fixed = SiftConfig(directions=4, siftings=1, path="fixed")
    for _ in range(100):
        samples = rng.uniform(-100.0, 100.0, (int(rng.integers(2, 4)), int(rng.integers(16, 80))))
        x = MultivariateSignal(samples)
        stack = decompose(x, 2, config)
        assert np.max(np.abs(stack.reconstruct() - samples)) <= 1e-9
        ctx = fx.ArithmeticContext()
        stack = decompose(x, 2, fixed, ctx=ctx)
        if not ctx.overflow:
            np.testing.assert_array_equal(stack.reconstruct(), fx.from_real(samples))


def test_scaled_input_scales_every_imf(mixture, small_config):
    stack = decompose(mixture, 2, small_config)
    doubled = decompose(mixture.with_samples(2.0 * mixture.samples), 2, small_config)
    np.testing.assert_allclose(doubled.imfs, 2.0 * stack.imfs, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(doubled.residue, 2.0 * stack.residue, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("path", ["real", "fixed"])
def test_stream_emission_is_ordered_and_lag_bounded(mixture, path):
    config = SiftConfig(directions=4, siftings=2, kmax=30, path=path)
    state = StreamState(4, 2, config, emit_chunk=4)
    lag_bound = state.occupancy_bound()
    emitted_to = {j: 0 for j in range(3)}
    x = mixture.to_path(path)
    for start in range(0, x.length, 5):
        for chunk in stream_push_block(state, x.samples[:, start:start + 5]):
            # each IMF row continues exactly where its previous chunk stopped
            assert chunk.start == emitted_to[chunk.imf_index]
            emitted_to[chunk.imf_index] += chunk.values.shape[1]
        for j in range(3):
            assert state.pushed - emitted_to[j] <= lag_bound
    for chunk in state.flush():
        assert chunk.start == emitted_to[chunk.imf_index]
        emitted_to[chunk.imf_index] += chunk.values.shape[1]
    assert emitted_to == {j: x.length for j in range(3)}


def test_block_push_matches_sample_push(mixture, small_config):
    x = MultivariateSignal(mixture.samples[:, :200], mixture.sample_rate)
    by_block = StreamState(4, 1, small_config)
    chunks = stream_push_block(by_block, x.samples) + by_block.flush()
    by_sample = StreamState(4, 1, small_config)
    tuples = [item for t in range(x.length) for item in stream_push(by_sample, x.samples[:, t])]
    tuples.extend(stream_flush(by_sample))
    a = collect_stream(chunks, 4, 1, x.length)
    b = collect_stream(tuples, 4, 1, x.length)
    np.testing.assert_array_equal(a.imfs, b.imfs)
    np.testing.assert_array_equal(a.residue, b.residue)
    with pytest.raises(Flushed):
        stream_push_block(by_block, x.samples[:, :3])
    with pytest.raises(Flushed):
        stream_flush(by_sample)
