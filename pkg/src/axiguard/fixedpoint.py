"""Signed fixed-point arithmetic helpers for the quantized detector.

A format <W,I> is two's-complement with W total bits and I integer bits
(sign included), leaving F = W - I fractional bits: step 2^-F, range
[-2^(I-1), 2^(I-1) - 2^-F].  Quantization rounds to nearest with ties to
even and saturates at the range ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import FormatError


@dataclass(frozen=True)
class FixedFormat:
    total_bits: int
    integer_bits: int

    def __post_init__(self):
        if not 2 <= self.total_bits <= 32:
            raise FormatError("total bits must be in [2, 32]")
        if not 0 <= self.integer_bits <= self.total_bits:
            raise FormatError("integer bits must be in [0, total bits]")

    @property
    def frac_bits(self) -> int:
        return self.total_bits - self.integer_bits

    @property
    def step(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def code_min(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def code_max(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_value(self) -> float:
        return self.code_min * self.step

    @property
    def max_value(self) -> float:
        return self.code_max * self.step

    @classmethod
    def parse(cls, text: str) -> "FixedFormat":
        """Accepts '8,5', '<8,5>', or '8.5' style format names."""
        clean = text.strip().lstrip("<").rstrip(">")
        for sep in (",", "."):
            if sep in clean:
                w, i = clean.split(sep, 1)
                return cls(int(w), int(i))
        raise FormatError(f"cannot parse fixed-point format {text!r}")

    def __str__(self) -> str:
        return f"<{self.total_bits},{self.integer_bits}>"


def quantize_value(x: Union[float, np.ndarray],
                   fmt: FixedFormat) -> Union[int, np.ndarray]:
    """Real value(s) -> integer code(s), round-half-even, saturating."""
    codes = np.rint(np.asarray(x, dtype=np.float64) / fmt.step)
    codes = np.clip(codes, fmt.code_min, fmt.code_max).astype(np.int64)
    if np.isscalar(x) or np.ndim(x) == 0:
        return int(codes)
    return codes


def dequantize(code: Union[int, np.ndarray],
               fmt: FixedFormat) -> Union[float, np.ndarray]:
    out = np.asarray(code, dtype=np.float64) * fmt.step
    if np.isscalar(code) or np.ndim(code) == 0:
        return float(out)
    return out


def quantize_dequantize(x, fmt: FixedFormat):
    """Project onto the representable grid (the QAT forward-pass view)."""
    return dequantize(quantize_value(x, fmt), fmt)


def rshift_round_even(v: np.ndarray, shift: int) -> np.ndarray:
    """Arithmetic right shift with round-half-even; exact integer math."""
    if shift <= 0:
        return v
    q = v >> shift
    r = v - (q << shift)
    half = 1 << (shift - 1)
    up = (r > half) | ((r == half) & ((q & 1) == 1))
    return q + up.astype(v.dtype)


# 256-entry sigmoid lookup on [-8, 8] with linear interpolation; clamped
# outside.  Table values are float64 sigmoids of the uniform grid, so two
# implementations following this recipe agree bit for bit.
SIGMOID_RANGE = 8.0
SIGMOID_ENTRIES = 256
_SIGMOID_GRID = np.linspace(-SIGMOID_RANGE, SIGMOID_RANGE, SIGMOID_ENTRIES)
SIGMOID_TABLE = 1.0 / (1.0 + np.exp(-_SIGMOID_GRID))


def sigmoid_lut(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    arr = np.asarray(x, dtype=np.float64)
    scale = (SIGMOID_ENTRIES - 1) / (2.0 * SIGMOID_RANGE)
    t = (arr + SIGMOID_RANGE) * scale
    t = np.clip(t, 0.0, SIGMOID_ENTRIES - 1)
    idx = np.minimum(t.astype(np.int64), SIGMOID_ENTRIES - 2)
    frac = t - idx
    out = SIGMOID_TABLE[idx] * (1.0 - frac) + SIGMOID_TABLE[idx + 1] * frac
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out
