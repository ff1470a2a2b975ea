import numpy as np
import pytest

from memd import fixed_point as fx
from memd.errors import DomainError, TableMiss


def test_from_real_quantises_and_saturates():
    ctx = fx.ArithmeticContext()
    assert fx.from_real(1.5) == 384
    assert fx.from_real(0.0) == 0
    assert not ctx.overflow
    assert fx.from_real(100000.0, ctx) == fx.RAW_MAX
    assert ctx.overflow
    assert ctx.saturations == 1


def test_from_real_rejects_nan():
    with pytest.raises(DomainError):
        fx.from_real(float("nan"))


@pytest.mark.parametrize("raw, expected", [(384, 2), (640, 2), (-384, -2), (128, 0), (383, 1)])
def test_shift_round_is_half_even(raw, expected):
    assert fx.shift_round(raw, 8) == expected


def test_add_exact_and_saturating():
    assert fx.to_real(fx.add(fx.from_real(1.5), fx.from_real(2.25))) == 3.75
    assert fx.add(fx.from_real(7.0), 0) == fx.from_real(7.0)

    ctx = fx.ArithmeticContext()
    assert fx.add(fx.from_real(32767.99), fx.from_real(1.0), ctx) == fx.RAW_MAX
    assert ctx.overflow
    # sticky
    fx.add(1, 1, ctx)
    assert ctx.overflow


def test_add_commutative_and_associative_without_saturation(rng):
    a, b, c = (rng.integers(-(1 << 20), 1 << 20, 500) for _ in range(3))
    np.testing.assert_array_equal(fx.add(a, b), fx.add(b, a))
    np.testing.assert_array_equal(fx.add(fx.add(a, b), c), fx.add(a, fx.add(b, c)))


def test_add_is_monotone_through_saturation(rng):
    a = rng.integers(fx.RAW_MIN, fx.RAW_MAX, 1000)
    b = a + rng.integers(0, 1 << 22, 1000)
    b = np.minimum(b, fx.RAW_MAX)
    x = rng.integers(fx.RAW_MIN, fx.RAW_MAX, 1000)
    assert np.all(fx.add(a, x) <= fx.add(b, x))


def test_mul():
    assert fx.mul(fx.from_real(1.5), fx.from_real(2.0)) == fx.from_real(3.0)
    # one LSB squared rounds to zero
    assert fx.mul(1, 1) == 0


def test_mul_by_one_is_identity(rng):
    a = rng.integers(fx.RAW_MIN, fx.RAW_MAX, 1000)
    np.testing.assert_array_equal(fx.mul(a, fx.from_real(1.0)), a)


def test_functions_keep_scalar_form():
    assert isinstance(fx.add(3, 4), int)
    assert isinstance(fx.mul(np.array([3]), 256), np.ndarray)


def test_csd_single_shift():
    half = fx.CsdConstant.from_real(0.5, frac_bits=8)
    assert half.terms == ((1, 1),)
    assert fx.csd_mul(256, half) == 128


def test_csd_zero_constant():
    zero = fx.CsdConstant.from_real(0.0)
    assert zero.terms == ()
    assert fx.csd_mul(12345, zero) == 0


def test_csd_recoded_constant():
    c = fx.CsdConstant.from_real(0.6875, frac_bits=8)
    # 0.6875 = 1 - 1/4 - 1/16
    assert c.terms == ((1, 0), (-1, 2), (-1, 4))
    assert c.reconstruct() == 0.6875
    assert fx.csd_mul(fx.from_real(1.0), c) == fx.mul(fx.from_real(1.0), fx.from_real(0.6875))


def test_csd_digits_are_non_adjacent(rng):
    for n in rng.integers(-(1 << 30), 1 << 30, 300):
        digits = fx.csd_digits(int(n))
        assert sum(d << i for i, d in enumerate(digits)) == n
        assert all(not (digits[i] and digits[i + 1]) for i in range(len(digits) - 1))


def test_csd_reconstruction_within_one_lsb(rng):
    for value in rng.uniform(-1.0, 1.0, 200):
        c = fx.CsdConstant.from_real(float(value))
        assert abs(c.reconstruct() - value) <= 1.0 / fx.SCALE


def test_csd_mul_matches_quantised_product(rng):
    a = rng.integers(-(1 << 20), 1 << 20, 10_000)
    values = rng.uniform(-1.0, 1.0, 10_000)
    for raw, value in zip(a[:2000], values[:2000]):
        c = fx.CsdConstant.from_real(float(value))
        exact = fx.from_real(fx.to_real(int(raw)) * value)
        assert abs(fx.csd_mul(int(raw), c) - exact) <= 1


def test_div_lut_examples():
    assert abs(fx.div_lut(fx.from_real(4.0), fx.from_real(2.0)) - fx.from_real(2.0)) <= 2
    assert abs(fx.div_lut(fx.from_real(1.0), fx.from_real(3.0)) - fx.from_real(0.33203125)) <= 2
    x = fx.from_real(-12.75)
    assert fx.div_lut(x, fx.from_real(1.0)) == x


def test_div_lut_error_bound(rng):
    num = rng.integers(-(1 << 16), 1 << 16, 2000)
    den = rng.integers(16, fx.LUT_MAX_RAW + 1, 2000)
    got = fx.div_lut(num, den)
    exact = np.rint(num * fx.SCALE / den)
    assert np.max(np.abs(got - exact)) <= 2


def test_div_lut_domain_and_table_miss():
    with pytest.raises(DomainError):
        fx.div_lut(256, 0)
    with pytest.raises(DomainError):
        fx.div_lut(256, -256)

    big = fx.from_real(500.0)
    with pytest.raises(TableMiss):
        fx.div_lut(fx.from_real(1000.0), big, strict=True)

    ctx = fx.ArithmeticContext()
    assert fx.div_lut(fx.from_real(1000.0), big, ctx) == fx.from_real(2.0)
    assert ctx.table_misses == 1
    assert ctx.fallback_divisions == 1


def test_ratio_has_wide_precision():
    assert fx.ratio(1, 4) == fx.WIDE_ONE // 4
    assert abs(fx.ratio(1, 3) - fx.WIDE_ONE / 3) <= 1
    with pytest.raises(DomainError):
        fx.ratio(1, 0)


def test_context_reset_and_snapshot():
    ctx = fx.ArithmeticContext()
    fx.saturate(fx.RAW_MAX + 10, ctx)
    assert ctx.snapshot()["saturations"] == 1
    ctx.reset()
    assert ctx.snapshot() == {
        "overflow": False,
        "saturations": 0,
        "table_misses": 0,
        "fallback_divisions": 0,
    }


def test_value_type_operators():
    a = fx.FixedQ16_8.from_real(1.5)
    b = fx.FixedQ16_8.from_real(2.25)
    assert (a + b).value == 3.75
    assert (b - a).value == 0.75
    assert (a * fx.FixedQ16_8.from_real(2.0)).value == 3.0
    assert float(fx.FixedQ16_8.from_real(4.0) / fx.FixedQ16_8.from_real(2.0)) == pytest.approx(2.0, abs=2 / 256)
    with pytest.raises(DomainError):
        fx.FixedQ16_8(fx.RAW_MAX + 1)


def test_value_type_operators_record_saturation():
    ctx = fx.ArithmeticContext()
    big = fx.FixedQ16_8.from_real(32767.99, ctx)
    total = big + fx.FixedQ16_8.from_real(1.0)
    assert total.raw == fx.RAW_MAX
    assert ctx.overflow
    assert total.ctx is ctx

    # the right operand's context is used when the left has none
    right = fx.ArithmeticContext()
    low = fx.FixedQ16_8(fx.RAW_MIN) - fx.FixedQ16_8.from_real(1.0, right)
    assert low.raw == fx.RAW_MIN
    assert right.saturations == 1


def test_value_type_without_context_still_saturates():
    total = fx.FixedQ16_8(fx.RAW_MAX) * fx.FixedQ16_8.from_real(2.0)
    assert total.raw == fx.RAW_MAX
    assert total.ctx is None
    assert fx.FixedQ16_8(5) == fx.FixedQ16_8(5, fx.ArithmeticContext())


def test_guarded_format_round_trip(rng):
    raw = rng.integers(fx.RAW_MIN, fx.RAW_MAX, 1000)
    np.testing.assert_array_equal(fx.narrow(fx.widen(raw)), raw)
    assert fx.widen(3) == 3 << fx.GUARD_BITS


@pytest.mark.parametrize("guarded, expected", [
    (384, 2),
    (640, 2),
    (641, 3),
    (-384, -2),
])
def test_narrow_rounds_half_even(guarded, expected):
    assert fx.narrow(guarded) == expected


def test_guarded_saturation_is_recorded():
    ctx = fx.ArithmeticContext()
    assert fx.saturate_guarded(fx.GUARDED_MAX + 10, ctx) == fx.GUARDED_MAX
    assert fx.saturate_guarded(fx.GUARDED_MIN, ctx) == fx.GUARDED_MIN
    assert ctx.saturations == 1
    assert fx.narrow(fx.GUARDED_MAX, ctx) == fx.RAW_MAX
    assert ctx.saturations == 2
