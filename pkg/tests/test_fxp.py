import numpy as np
import pytest
from hypothesis import given, strategies as st

from gripsim.fxp import (
    FEATURE_FMT,
    WEIGHT_FMT,
    FxFormat,
    I16_MAX,
    I16_MIN,
    dequantize,
    div_rne,
    quantize,
    rne_shift,
    saturate16,
)


def test_q412_unit_value():
    assert quantize(1.0, FEATURE_FMT) == 4096
    assert quantize(0.0, FEATURE_FMT) == 0
    assert dequantize(np.array(4096), FEATURE_FMT) == 1.0


def test_format_must_total_sixteen_bits():
    with pytest.raises(ValueError):
        FxFormat(3, 12)


def test_round_to_nearest_even():
    # 0.5 ulp ties round to the even code.
    half_ulp = 0.5 / FEATURE_FMT.scale
    assert quantize(2 * (1.0 / FEATURE_FMT.scale) + half_ulp) == 2  # tie -> even 2
    assert quantize(3 * (1.0 / FEATURE_FMT.scale) + half_ulp) == 4  # tie -> even 4


def test_saturation_bounds():
    assert quantize(100.0, FEATURE_FMT) == I16_MAX
    assert quantize(-100.0, FEATURE_FMT) == I16_MIN
    assert saturate16(np.array([1 << 20, -(1 << 20)])).tolist() == [I16_MAX, I16_MIN]


def test_roundtrip_exact_for_all_codes():
    raw = np.arange(I16_MIN, I16_MAX + 1, dtype=np.int16)
    again = quantize(dequantize(raw, FEATURE_FMT), FEATURE_FMT)
    assert np.array_equal(raw, again)


def test_roundtrip_error_bound_random_sweep():
    rng = np.random.default_rng(11)
    x = rng.uniform(-7.99, 7.99, size=100_000)
    err = np.abs(dequantize(quantize(x)) - x)
    assert err.max() <= 2.0**-13


def test_rne_shift_matches_float_rounding():
    rng = np.random.default_rng(3)
    v = rng.integers(-(1 << 30), 1 << 30, size=10_000)
    got = rne_shift(v, 14)
    want = np.rint(v / 2.0**14).astype(np.int64)  # numpy rint is half-even
    assert np.array_equal(got, want)


def test_div_rne_half_even():
    assert div_rne(np.array([5]), 2)[0] == 2  # 2.5 -> 2
    assert div_rne(np.array([7]), 2)[0] == 4  # 3.5 -> 4
    assert div_rne(np.array([-5]), 2)[0] == -2  # -2.5 -> -2
    assert div_rne(np.array([5248]), 3)[0] == 1749


@given(st.integers(-(1 << 40), 1 << 40), st.integers(1, 1000))
def test_div_rne_matches_exact_rational(num, den):
    got = int(div_rne(np.array([num]), den)[0])
    exact = num / den
    assert abs(got - exact) <= 0.5
    if abs(got - exact) == 0.5:
        assert got % 2 == 0


def test_weight_format_range():
    assert quantize(1.0, WEIGHT_FMT) == 16384
    assert WEIGHT_FMT.max_value < 2.0
    assert WEIGHT_FMT.min_value == -2.0
