"""Two-level lookup-table activation with linear interpolation.

The activate unit approximates scalar functions with two overlapping
tables: a fine inner level of 33 entries over [-2^a, 2^a] and a coarse
outer level of 9 entries over [-2^b, 2^b], b > a. Entries linearly
partition each range (entry 0 of level 1 sits at -2^a). Inputs are 16-bit
fixed point with 4 integer bits (Q4.12). Levels are checked in series;
inputs beyond both ranges follow a per-sign overflow policy: clamp to the
outer boundary entry, or a user-supplied linear function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecError
from .fxp import FEATURE_FMT, FxFormat, quantize, rne_shift, saturate16

LEVEL1_ENTRIES = 33
LEVEL2_ENTRIES = 9


@dataclass(frozen=True)
class OverflowPolicy:
    """Out-of-range behavior for one sign: clamp, or slope*x + intercept."""

    kind: str = "clamp"  # "clamp" | "linear"
    slope: float = 0.0
    intercept: float = 0.0


@dataclass
class Lut:
    a: int
    b: int
    level1: np.ndarray  # 33 int16 entries, activation format
    level2: np.ndarray  # 9 int16 entries
    positive: OverflowPolicy
    negative: OverflowPolicy
    fmt: FxFormat = FEATURE_FMT

    def __post_init__(self):
        # Node spacing must be a whole number of raw codes so that node
        # positions are exact: level 1 step = 2^(a+1)/32, level 2 = 2^(b+1)/8.
        if self.a + self.fmt.frac_bits - 4 < 0 or self.b + self.fmt.frac_bits - 2 < 0:
            raise SpecError("LUT range too narrow for the input format")

    @property
    def _shift1(self) -> int:
        return self.a + self.fmt.frac_bits - 4

    @property
    def _shift2(self) -> int:
        return self.b + self.fmt.frac_bits - 2

    def eval(self, raw: np.ndarray) -> np.ndarray:
        """Evaluate on raw int16 codes; returns raw int16 codes."""
        x = np.asarray(raw, dtype=np.int64)
        out = np.zeros_like(x)
        lim1 = 1 << (self.a + self.fmt.frac_bits)
        lim2 = 1 << (self.b + self.fmt.frac_bits)
        in1 = np.abs(x) <= lim1
        in2 = ~in1 & (np.abs(x) <= lim2)
        over = ~in1 & ~in2
        if in1.any():
            out[in1] = _interp(x[in1], self.level1, lim1, self._shift1)
        if in2.any():
            out[in2] = _interp(x[in2], self.level2, lim2, self._shift2)
        if over.any():
            pos = over & (x > 0)
            neg = over & (x < 0)
            out[pos] = _overflow(x[pos], self.positive, self.level2[-1], self.fmt)
            out[neg] = _overflow(x[neg], self.negative, self.level2[0], self.fmt)
        return saturate16(out)


def _interp(x: np.ndarray, table: np.ndarray, lim: int, shift: int) -> np.ndarray:
    """Linear interpolation between the two bracketing table entries.

    At a node the fractional part is zero, so the table value is returned
    verbatim (evaluation is exact at interpolation nodes).
    """
    offset = x + lim
    idx = offset >> shift
    frac = offset - (idx << shift)
    idx = np.minimum(idx, len(table) - 2)
    # Inputs exactly at the top node land on the last entry with frac == step.
    top = offset == ((len(table) - 1) << shift)
    frac = np.where(top, 0, frac)
    idx = np.where(top, len(table) - 1, idx)
    y0 = table[idx].astype(np.int64)
    y1 = table[np.minimum(idx + 1, len(table) - 1)].astype(np.int64)
    return y0 + rne_shift((y1 - y0) * frac, shift)


def _overflow(x, policy: OverflowPolicy, boundary_entry, fmt: FxFormat):
    if policy.kind == "clamp":
        return np.full_like(x, int(boundary_entry))
    slope_raw = int(quantize(policy.slope, fmt))
    intercept_raw = int(quantize(policy.intercept, fmt))
    return rne_shift(slope_raw * x, fmt.frac_bits) + intercept_raw


def lut_build(
    fn,
    a: int,
    b: int,
    positive: OverflowPolicy | None = None,
    negative: OverflowPolicy | None = None,
    fmt: FxFormat = FEATURE_FMT,
) -> Lut:
    """Sample `fn` at the table nodes and quantize the entries.

    Level 1 must be the denser table over the narrower range, so b > a is
    required. With Q4.12 inputs b can be at most 3 (full input range).
    """
    if b <= a:
        raise SpecError("outer exponent b must be greater than a")
    if b > fmt.int_bits - 1:
        raise SpecError(f"2^b exceeds the {fmt} input range")
    nodes1 = np.linspace(-(2.0**a), 2.0**a, LEVEL1_ENTRIES)
    nodes2 = np.linspace(-(2.0**b), 2.0**b, LEVEL2_ENTRIES)
    level1 = quantize([fn(x) for x in nodes1], fmt)
    level2 = quantize([fn(x) for x in nodes2], fmt)
    return Lut(
        a,
        b,
        level1,
        level2,
        positive or OverflowPolicy(),
        negative or OverflowPolicy(),
        fmt,
    )


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sigmoid_lut(a: int = 1, b: int = 3) -> Lut:
    return lut_build(sigmoid, a, b)
