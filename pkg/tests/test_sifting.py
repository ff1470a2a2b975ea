import numpy as np
import pytest

from memd import fixed_point as fx
from memd.directions import direction_set
from memd.errors import ConfigError, DimensionMismatch, ResidueReached, TooFewExtrema
from memd.extrema import MAXIMA, STRICT, ExtremaRecord
from memd.sifting import (
    GLOBAL,
    LINEAR,
    MEAN_K,
    EnvelopeRecords,
    SiftConfig,
    SiftStage,
    envelope_knots,
    envelopes,
    extract_imf,
    find_records,
    horizon_envelope,
    local_mean,
    project,
    sift_once,
)
from memd.signals import MultivariateSignal


def test_config_validation():
    with pytest.raises(ConfigError):
        SiftConfig(directions=0)
    with pytest.raises(ConfigError):
        SiftConfig(siftings=0)
    with pytest.raises(ConfigError):
        SiftConfig(envelope="akima")
    with pytest.raises(ConfigError):
        SiftConfig(path="fixed", spline_window=GLOBAL)
    assert SiftConfig(directions=8).n_envelopes == 16
    assert SiftConfig(directions=8, mean_mode=MEAN_K).n_envelopes == 8


def test_projection_matches_matrix_product(mixture):
    dirs = direction_set(4, 8)
    np.testing.assert_allclose(project(mixture, dirs), dirs.vectors @ mixture.samples, atol=1e-10)


def test_projection_channel_mismatch(mixture):
    with pytest.raises(DimensionMismatch):
        project(mixture, direction_set(3, 8))


def test_fixed_projection_tracks_real(mixture):
    dirs = direction_set(4, 8)
    ctx = fx.ArithmeticContext()
    fixed = project(mixture.to_fixed(ctx), dirs, ctx)
    assert fixed.dtype == np.int64
    assert np.max(np.abs(fx.to_real(fixed) - project(mixture, dirs))) <= 3 / fx.SCALE
    assert not ctx.overflow


def test_envelope_knots_mirror_two_per_edge():
    x_i = np.arange(16, dtype=float) * 0.5
    records = [ExtremaRecord(i, 0.0, "maximum", i + 1) for i in (3, 7, 12)]
    knots = envelope_knots(x_i, records)
    assert [k.x for k in knots] == [-7, -3, 3, 7, 12, 18, 23]
    assert [k.y for k in knots] == [3.5, 1.5, 1.5, 3.5, 6.0, 6.0, 3.5]


def test_envelope_knots_need_two_records():
    with pytest.raises(TooFewExtrema):
        envelope_knots(np.zeros(8), [ExtremaRecord(3, 0.0, "maximum", 4)])


def test_find_records_deduplicates_plateaus():
    y = np.array([0, 2, 2, 0, 1, 0, 3, 3, 3, 0], dtype=float)
    idx, det = find_records(y, MAXIMA, "inclusive")
    np.testing.assert_array_equal(idx, [1, 4, 6])
    np.testing.assert_array_equal(det, [2, 5, 7])
    idx, det = find_records(y, MAXIMA, STRICT)
    np.testing.assert_array_equal(idx, [1, 4, 6])
    np.testing.assert_array_equal(det, [3, 5, 9])


@pytest.mark.parametrize("window", ["windowed", GLOBAL])
def test_envelopes_pass_through_their_extrema(mixture, window):
    config = SiftConfig(directions=4, spline_window=window, kmax=10_000)
    dirs = direction_set(4, 4)
    y = project(mixture, dirs)
    for env in envelopes(mixture, dirs, config):
        idx, _ = find_records(y[env.direction], env.polarity, config.tie_policy)
        np.testing.assert_allclose(env.values[:, idx], mixture.samples[:, idx], atol=1e-9)


def test_horizon_without_confirmed_records_returns_samples():
    samples = np.arange(12, dtype=float).reshape(2, 6)
    rec = EnvelopeRecords(
        idx=np.array([40, 50]), det=np.array([41, 51]), ords=np.zeros((2, 2))
    )
    out = horizon_envelope(rec, samples, SiftConfig(directions=4, kmax=4))
    np.testing.assert_array_equal(out, samples)


def test_horizon_single_confirmed_record_is_flat():
    samples = np.zeros((1, 6))
    rec = EnvelopeRecords(
        idx=np.array([2, 50]), det=np.array([3, 51]), ords=np.array([[5.0, 9.0]])
    )
    out = horizon_envelope(rec, samples, SiftConfig(directions=4, kmax=4))
    np.testing.assert_allclose(out, 5.0)


def test_large_kmax_uses_full_windows(mixture):
    dirs = direction_set(4, 4)
    wide = local_mean(mixture, dirs, SiftConfig(directions=4, kmax=10_000))
    default = local_mean(mixture, dirs, SiftConfig(directions=4, kmax=256))
    # fast tones confirm their extrema within a few samples
    np.testing.assert_allclose(wide.samples[:, :600], default.samples[:, :600])


def test_local_mean_of_residue_raises(ramp):
    with pytest.raises(ResidueReached):
        local_mean(ramp, direction_set(2, 4), SiftConfig(directions=4))


def test_sift_once_subtracts_mean(mixture, small_config):
    dirs = direction_set(4, small_config.directions)
    mean = local_mean(mixture, dirs, small_config)
    h = sift_once(mixture, dirs, small_config)
    np.testing.assert_allclose(h.samples, mixture.samples - mean.samples)


def test_extract_imf_on_residue(ramp):
    dirs = direction_set(2, 4)
    imf, residue = extract_imf(ramp, dirs, SiftConfig(directions=4))
    assert not imf.samples.any()
    np.testing.assert_array_equal(residue.samples, ramp.samples)


def test_first_imf_follows_fastest_tone():
    t = np.arange(1200)
    fast = np.sin(2 * np.pi * t / 12)
    slow = 3 * np.sin(2 * np.pi * t / 240)
    x = MultivariateSignal(np.vstack([fast + slow, fast - slow, 0.5 * fast + slow]))
    dirs = direction_set(3, 8)
    imf, residue = extract_imf(x, dirs, SiftConfig())
    inner = slice(100, 1100)
    for i, gain in enumerate((1.0, 1.0, 0.5)):
        assert np.corrcoef(imf.samples[i, inner], gain * fast[inner])[0, 1] > 0.9
    np.testing.assert_allclose(imf.samples + residue.samples, x.samples, atol=1e-9)


@pytest.mark.parametrize("options", [
    {"envelope": LINEAR},
    {"mean_mode": MEAN_K},
    {"tie_policy": STRICT},
    {"spline_window": GLOBAL},
    {"path": "fixed"},
])
def test_variants_produce_finite_imfs(mixture, options):
    config = SiftConfig(directions=4, siftings=2, **options)
    x = mixture.to_path(config.path)
    imf, residue = extract_imf(x, direction_set(4, 4), config)
    assert imf.samples.shape == x.samples.shape
    assert np.all(np.isfinite(imf.to_real().samples))
    assert imf.samples.any()


def test_stream_stage_requires_windowed_mode():
    with pytest.raises(ConfigError):
        SiftStage(direction_set(2, 4), SiftConfig(directions=4, spline_window=GLOBAL))


def test_stream_stage_matches_sift_once(mixture, small_config):
    dirs = direction_set(4, small_config.directions)
    stage = SiftStage(dirs, small_config)
    parts = []
    for start in range(0, mixture.length, 50):
        block = mixture.samples[:, start:start + 50]
        s, h, carry = stage.feed(block, block)
        parts.append((s, h, carry))
    parts.append(stage.flush())
    h = np.concatenate([p[1] for p in parts], axis=1)
    carry = np.concatenate([p[2] for p in parts], axis=1)
    starts = np.cumsum([0] + [p[1].shape[1] for p in parts[:-1]])
    assert [p[0] for p in parts] == list(starts)
    np.testing.assert_array_equal(h, sift_once(mixture, dirs, small_config).samples)
    np.testing.assert_array_equal(carry, mixture.samples)
    assert stage.buffered == 0


def _level_crossing_pair():
    # every extremum of every projection sits on a level of +/-4 around the channel offsets
    t = np.arange(200)
    s = np.abs(t % 16 - 8) - 4.0
    return MultivariateSignal(np.vstack([3.0 + s, -2.0 + 0.5 * s]))


@pytest.mark.parametrize("path", ["real", "fixed"])
def test_local_mean_of_constant_envelopes_is_the_offset(path):
    x = _level_crossing_pair().to_path(path)
    config = SiftConfig(directions=8, path=path)
    mean = local_mean(x, direction_set(2, 8), config)
    np.testing.assert_allclose(mean.to_real().samples[0], 3.0, atol=1e-9)
    np.testing.assert_allclose(mean.to_real().samples[1], -2.0, atol=1e-9)


def test_scaled_input_scales_the_imf(mixture):
    dirs = direction_set(4, 4)
    config = SiftConfig(directions=4, siftings=2)
    imf, residue = extract_imf(mixture, dirs, config)
    imf2, residue2 = extract_imf(mixture.with_samples(2.0 * mixture.samples), dirs, config)
    np.testing.assert_allclose(imf2.samples, 2.0 * imf.samples, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(residue2.samples, 2.0 * residue.samples, rtol=1e-12, atol=1e-12)


def test_fixed_imf_and_residue_reconstruct_exactly(mixture):
    ctx = fx.ArithmeticContext()
    x = mixture.to_fixed(ctx)
    imf, residue = extract_imf(x, direction_set(4, 4), SiftConfig(directions=4, siftings=2, path="fixed"), ctx)
    np.testing.assert_array_equal(imf.samples + residue.samples, x.samples)
    assert not ctx.overflow


def test_support_widens_the_spline_window(mixture):
    dirs = direction_set(4, 4)
    narrow = local_mean(mixture, dirs, SiftConfig(directions=4, support=1))
    wide = local_mean(mixture, dirs, SiftConfig(directions=4, support=4))
    assert not np.array_equal(narrow.samples, wide.samples)
    assert np.all(np.isfinite(narrow.samples))


@pytest.mark.parametrize("block", [1, 7, 64])
def test_short_lookahead_stream_stage_matches_sift_once(mixture, block):
    config = SiftConfig(directions=4, siftings=1, kmax=24, support=2)
    dirs = direction_set(4, config.directions)
    stage = SiftStage(dirs, config, emit_chunk=1)
    parts = [stage.feed(mixture.samples[:, s:s + block], mixture.samples[:, s:s + block])
             for s in range(0, mixture.length, block)]
    parts.append(stage.flush())
    h = np.concatenate([p[1] for p in parts], axis=1)
    np.testing.assert_array_equal(h, sift_once(mixture, dirs, config).samples)


@pytest.mark.parametrize("path", ["real", "fixed"])
def test_envelope_range_equals_sample_by_sample(path):
    # three records fit inside one clamped window, so several intervals share its bounds
    dtype = np.int64 if path == "fixed" else float
    ords = np.array([[900, -300, 1200], [-50, 400, 20]], dtype=dtype)
    rec = EnvelopeRecords(idx=np.array([3, 9, 14]), det=np.array([4, 10, 15]), ords=ords)
    config = SiftConfig(directions=4, kmax=100, path=path)
    fallback = np.zeros((2, 20), dtype=dtype)
    whole = horizon_envelope(rec, fallback, config, end=20)
    single = np.concatenate(
        [horizon_envelope(rec, fallback[:, t:t + 1], config, t0=t, end=20) for t in range(20)], axis=1
    )
    np.testing.assert_array_equal(whole, single)
    np.testing.assert_array_equal(whole[:, [3, 9, 14]], ords)
