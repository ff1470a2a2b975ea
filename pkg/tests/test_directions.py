import numpy as np
import pytest

from memd.directions import (
    DirectionSet,
    direction_set,
    hammersley_point,
    min_pairwise_angle,
    radical_inverse,
    random_direction_sets,
)
from memd.errors import ConfigError
from memd.fixed_point import SCALE


@pytest.mark.parametrize("index, base, expected", [
    (1, 2, 0.5),
    (3, 2, 0.75),
    (4, 2, 0.125),
    # 5 = 12 in base 3, mirrored: 0.21 = 2/3 + 1/9
    (5, 3, 7 / 9),
    (7, 3, 5 / 9),
    (0, 5, 0.0),
])
def test_radical_inverse(index, base, expected):
    assert radical_inverse(index, base) == pytest.approx(expected, abs=1e-15)


def test_hammersley_points():
    np.testing.assert_allclose(hammersley_point(0, 8, 2), [0.0, 0.0])
    np.testing.assert_allclose(hammersley_point(4, 8, 2), [0.5, 0.125])
    np.testing.assert_allclose(hammersley_point(7, 8, 3), [0.875, 0.875, 5 / 9])
    with pytest.raises(ValueError):
        hammersley_point(8, 8, 2)


def test_two_channel_set_is_evenly_spaced_circle():
    dirs = direction_set(2, 8)
    theta = 2 * np.pi * np.arange(8) / 8
    expected = np.column_stack([np.cos(theta), np.sin(theta)])
    np.testing.assert_allclose(dirs.vectors, expected, atol=1e-12)


def test_single_direction_is_unit():
    dirs = direction_set(3, 1)
    assert dirs.vectors.shape == (1, 3)
    assert np.linalg.norm(dirs.vectors[0]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n_channels, n_directions", [(2, 8), (3, 8), (4, 8), (4, 16), (6, 32)])
def test_rows_are_unit_and_distinct(n_channels, n_directions):
    dirs = direction_set(n_channels, n_directions)
    assert dirs.vectors.shape == (n_directions, n_channels)
    np.testing.assert_allclose(np.linalg.norm(dirs.vectors, axis=1), 1.0, atol=1e-9)
    assert dirs.min_pairwise_angle() > 0


def test_deterministic():
    a = direction_set(4, 8).vectors
    direction_set.cache_clear()
    b = direction_set(4, 8).vectors
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("n_channels", [3, 4])
def test_quasi_uniform_beats_worst_random_set(n_channels):
    dirs = direction_set(n_channels, 8)
    worst_random = min(
        min_pairwise_angle(v) for v in random_direction_sets(n_channels, 8, 100, seed=7)
    )
    assert dirs.min_pairwise_angle() > worst_random


def test_quantised_coefficients_within_one_lsb():
    dirs = direction_set(4, 8)
    for row, constants in zip(dirs.vectors, dirs.quantized):
        for value, c in zip(row, constants):
            assert abs(c.reconstruct() - value) <= 1.0 / SCALE
    assert dirs.coeff_raw.shape == (8, 4)


def test_csv_round_trip(tmp_path):
    dirs = direction_set(3, 8)
    path = tmp_path / "dirs.csv"
    dirs.to_csv(path)
    loaded = DirectionSet.from_csv(path)
    np.testing.assert_allclose(loaded.vectors, dirs.vectors, atol=1e-15)
    assert loaded.n_channels == 3
    assert loaded.n_directions == 8


def test_invalid_sets():
    with pytest.raises(ConfigError):
        direction_set(1, 8)
    with pytest.raises(ConfigError):
        direction_set(3, 0)
    with pytest.raises(ConfigError):
        DirectionSet.from_vectors(np.array([[1.0, 1.0]]))
