"""16-bit fixed-point formats and saturating arithmetic helpers.

All on-chip values are 16-bit two's-complement with a declared Q-format
(int_bits + frac_bits == 16, sign included in int_bits). Wide intermediates
are carried exactly in int64 and narrowed once with round-to-nearest-even;
saturation happens only on narrowing, never by wrapping. The hardware being
modeled accumulates in 32 bits; desk-scale workloads stay inside that range
and `check_acc_range` can assert it when debugging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

I16_MIN = -(1 << 15)
I16_MAX = (1 << 15) - 1
ACC_MIN = -(1 << 31)
ACC_MAX = (1 << 31) - 1


@dataclass(frozen=True)
class FxFormat:
    """Q-format descriptor: `int_bits` integer bits (incl. sign) + `frac_bits`."""

    int_bits: int
    frac_bits: int

    def __post_init__(self):
        if self.int_bits + self.frac_bits != 16:
            raise ValueError("int_bits + frac_bits must equal 16")
        if self.int_bits < 1:
            raise ValueError("need at least the sign bit")

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def max_value(self) -> float:
        return I16_MAX / self.scale

    @property
    def min_value(self) -> float:
        return I16_MIN / self.scale

    @property
    def resolution(self) -> float:
        return 1.0 / self.scale

    def __str__(self):
        return f"Q{self.int_bits}.{self.frac_bits}"


# Feature/accumulator vectors use Q4.12 (the LUT input format); weights Q2.14.
FEATURE_FMT = FxFormat(4, 12)
WEIGHT_FMT = FxFormat(2, 14)


def saturate16(values: np.ndarray) -> np.ndarray:
    """Clamp an integer array into int16 range and narrow the dtype."""
    return np.clip(values, I16_MIN, I16_MAX).astype(np.int16)


def quantize(values, fmt: FxFormat = FEATURE_FMT) -> np.ndarray:
    """Real array -> raw int16 codes; round-to-nearest-even, saturating."""
    scaled = np.asarray(values, dtype=np.float64) * fmt.scale
    # np.rint rounds halves to even, matching the hardware rounding mode.
    return saturate16(np.rint(scaled))


def dequantize(raw, fmt: FxFormat = FEATURE_FMT) -> np.ndarray:
    return np.asarray(raw, dtype=np.int64).astype(np.float64) / fmt.scale


def rne_shift(values: np.ndarray, shift: int) -> np.ndarray:
    """Arithmetic right shift with round-to-nearest-even, exact in int64.

    This is the single narrowing round-off applied when a wide accumulator
    (e.g. a Q6.26 product sum) is brought back to a 16-bit format.
    """
    if shift == 0:
        return np.asarray(values, dtype=np.int64)
    v = np.asarray(values, dtype=np.int64)
    q = v >> shift  # floor division for negatives
    r = v - (q << shift)
    half = 1 << (shift - 1)
    round_up = (r > half) | ((r == half) & ((q & 1) == 1))
    return q + round_up


def div_rne(num: np.ndarray, den) -> np.ndarray:
    """Exact integer division rounded to nearest, ties to even.

    Used by the mean reduce finalize; being an exact function of (sum, count)
    it is independent of accumulation order.
    """
    num = np.asarray(num, dtype=np.int64)
    den = np.asarray(den, dtype=np.int64)
    if np.any(den <= 0):
        raise ValueError("divisor must be positive")
    q = num // den
    r = num - q * den
    twice = 2 * r
    round_up = (twice > den) | ((twice == den) & ((q & 1) == 1))
    return q + round_up


def check_acc_range(values: np.ndarray):
    """Assert wide intermediates stayed inside the modeled 32-bit accumulator."""
    v = np.asarray(values)
    if v.size and (v.max(initial=0) > ACC_MAX or v.min(initial=0) < ACC_MIN):
        raise OverflowError("accumulator exceeded 32-bit range")


@dataclass
class FixedVec:
    """A fixed-point vector or row-major matrix: raw int16 codes + format."""

    raw: np.ndarray
    fmt: FxFormat = FEATURE_FMT

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.int16)

    @classmethod
    def from_real(cls, values, fmt: FxFormat = FEATURE_FMT) -> "FixedVec":
        return cls(quantize(values, fmt), fmt)

    def to_real(self) -> np.ndarray:
        return dequantize(self.raw, self.fmt)

    @property
    def shape(self):
        return self.raw.shape

    def __len__(self):
        return len(self.raw)
