"""Fixed-point quantization semantics, round-trip bounds, sigmoid LUT."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from axiguard.errors import FormatError
from axiguard.fixedpoint import (FixedFormat, dequantize, quantize_value,
                                 rshift_round_even, sigmoid_lut)


class TestFormat:
    def test_8_5_geometry(self):
        fmt = FixedFormat(8, 5)
        assert fmt.frac_bits == 3
        assert fmt.step == 0.125
        assert fmt.min_value == -16.0
        assert fmt.max_value == 15.875

    def test_2_0_geometry(self):
        fmt = FixedFormat(2, 0)
        assert fmt.step == 0.25
        assert fmt.min_value == -0.5
        assert fmt.max_value == 0.25

    def test_bounds_enforced(self):
        with pytest.raises(FormatError):
            FixedFormat(1, 0)
        with pytest.raises(FormatError):
            FixedFormat(8, 9)
        with pytest.raises(FormatError):
            FixedFormat(33, 5)

    def test_parse_variants(self):
        assert FixedFormat.parse("8,5") == FixedFormat(8, 5)
        assert FixedFormat.parse("<8,5>") == FixedFormat(8, 5)
        assert FixedFormat.parse("8.3") == FixedFormat(8, 3)
        with pytest.raises(FormatError):
            FixedFormat.parse("nope")


class TestQuantize:
    def test_rounds_down_to_quarter(self):
        fmt = FixedFormat(8, 5)
        assert quantize_value(0.30, fmt) == 2
        assert dequantize(2, fmt) == 0.25

    def test_saturates_high(self):
        fmt = FixedFormat(8, 5)
        assert quantize_value(100.0, fmt) == 127
        assert dequantize(127, fmt) == 15.875

    def test_exact_at_min(self):
        fmt = FixedFormat(8, 5)
        assert quantize_value(-16.0, fmt) == -128
        assert dequantize(-128, fmt) == -16.0

    def test_ties_to_even(self):
        fmt = FixedFormat(8, 5)
        # 0.0625 / step = 0.5 -> 0 (even); 0.1875 / step = 1.5 -> 2
        assert quantize_value(0.0625, fmt) == 0
        assert quantize_value(0.1875, fmt) == 2

    @pytest.mark.parametrize("w,i", [(8, 5), (8, 3), (8, 1), (2, 0),
                                     (16, 8)])
    def test_round_trip_error_bound(self, w, i):
        fmt = FixedFormat(w, i)
        rng = np.random.default_rng(99)
        x = rng.uniform(fmt.min_value, fmt.max_value, size=100_000)
        err = np.abs(np.asarray(dequantize(quantize_value(x, fmt), fmt)) - x)
        assert err.max() <= 2.0 ** (-fmt.frac_bits - 1) + 1e-15

    def test_out_of_range_maps_to_nearest_end(self):
        fmt = FixedFormat(8, 5)
        assert dequantize(quantize_value(1e9, fmt), fmt) == fmt.max_value
        assert dequantize(quantize_value(-1e9, fmt), fmt) == fmt.min_value

    @given(st.floats(min_value=-1e6, max_value=1e6,
                     allow_nan=False, allow_infinity=False))
    @settings(max_examples=300, deadline=None)
    def test_quantize_always_lands_in_range(self, x):
        fmt = FixedFormat(8, 3)
        code = quantize_value(x, fmt)
        assert fmt.code_min <= code <= fmt.code_max
        if fmt.min_value <= x <= fmt.max_value:
            assert abs(dequantize(code, fmt) - x) <= fmt.step / 2 + 1e-15


class TestShiftRounding:
    def test_matches_float_rint(self):
        rng = np.random.default_rng(3)
        v = rng.integers(-10_000, 10_000, size=5_000)
        for shift in (1, 3, 8):
            got = rshift_round_even(v, shift)
            want = np.rint(v / (1 << shift)).astype(np.int64)
            assert np.array_equal(got, want)


class TestSigmoidLut:
    def test_midpoint_and_clamps(self):
        assert sigmoid_lut(0.0) == 0.5
        assert sigmoid_lut(-100.0) == sigmoid_lut(-8.0)
        assert sigmoid_lut(100.0) == sigmoid_lut(8.0)

    def test_monotone_and_close_to_exact(self):
        x = np.linspace(-8, 8, 4001)
        y = sigmoid_lut(x)
        assert np.all(np.diff(y) >= 0)
        exact = 1.0 / (1.0 + np.exp(-x))
        assert np.abs(y - exact).max() < 1.5e-3

    def test_bit_stable(self):
        x = np.random.default_rng(1).uniform(-10, 10, 1000)
        assert np.array_equal(sigmoid_lut(x), sigmoid_lut(x))
