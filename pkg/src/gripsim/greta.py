"""The four stateless UDF families executed by the accelerator model.

A program applies: gather over edges (producing a message per edge),
reduce folding messages into a per-output-vertex edge accumulator,
transform (matrix multiply plus elementwise sum, the only UDF with weight
access), and activate (ReLU, identity, or a two-level LUT).

Numeric conventions: messages and finalized accumulators are 16-bit
(feature format); reduce folds in wide integers and narrows once at
finalize; transform accumulates products in wide integers and narrows
once per output element. All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, SpecError
from .fxp import (
    FEATURE_FMT,
    I16_MIN,
    FixedVec,
    div_rne,
    quantize,
    rne_shift,
    saturate16,
)
from .lut import Lut

GATHER_KINDS = ("identity", "sum", "product", "scale")
REDUCE_KINDS = ("sum", "max", "mean")
ACTIVATE_KINDS = ("relu", "identity", "lut")


@dataclass(frozen=True)
class Operand:
    """One gather input: a feature slot read at the edge's src or dst endpoint."""

    endpoint: str  # 'src' | 'dst'
    slot: str


@dataclass(frozen=True)
class Gather:
    kind: str
    a: Operand
    b: Operand | None = None
    const: float = 1.0

    def __post_init__(self):
        if self.kind not in GATHER_KINDS:
            raise SpecError(f"unknown gather kind {self.kind!r}")
        if self.kind in ("sum", "product") and self.b is None:
            raise SpecError(f"gather {self.kind} needs two operands")

    @property
    def operands(self):
        return (self.a,) if self.b is None else (self.a, self.b)


def identity_src(slot: str = "h") -> Gather:
    return Gather("identity", Operand("src", slot))


def identity_dst(slot: str = "h") -> Gather:
    return Gather("identity", Operand("dst", slot))


def elementwise_sum(a: Operand, b: Operand) -> Gather:
    return Gather("sum", a, b)


def elementwise_product(a: Operand, b: Operand) -> Gather:
    return Gather("product", a, b)


def scale_by_constant(slot: str, const: float) -> Gather:
    return Gather("scale", Operand("src", slot), const=const)


def gather_raw(kind: str, a: np.ndarray, b: np.ndarray | None, const: float,
               fmt=FEATURE_FMT) -> np.ndarray:
    """Vectorized gather on raw codes; output saturates to the 16-bit format."""
    a = np.asarray(a, dtype=np.int64)
    if kind == "identity":
        return saturate16(a)
    if kind == "sum":
        return saturate16(a + np.asarray(b, dtype=np.int64))
    if kind == "product":
        wide = a * np.asarray(b, dtype=np.int64)
        return saturate16(rne_shift(wide, fmt.frac_bits))
    if kind == "scale":
        c = int(quantize(const, fmt))
        return saturate16(rne_shift(a * c, fmt.frac_bits))
    raise SpecError(f"unknown gather kind {kind!r}")


def gather_apply(kind: str, h_u: FixedVec, h_v: FixedVec, h_e: FixedVec | None = None,
                 const: float = 1.0) -> FixedVec:
    """Apply one gather to a single edge's operand vectors.

    Kind names follow the PE configuration set: identity-src, identity-dst,
    elementwise-sum, elementwise-product, scale-by-constant.
    """
    if kind == "identity-src":
        return FixedVec(h_u.raw.copy(), h_u.fmt)
    if kind == "identity-dst":
        return FixedVec(h_v.raw.copy(), h_v.fmt)
    if kind in ("elementwise-sum", "elementwise-product"):
        if h_u.shape != h_v.shape:
            raise ShapeError("gather operands must have matching length")
        op = "sum" if kind == "elementwise-sum" else "product"
        return FixedVec(gather_raw(op, h_u.raw, h_v.raw, 1.0, h_u.fmt), h_u.fmt)
    if kind == "scale-by-constant":
        return FixedVec(gather_raw("scale", h_u.raw, None, const, h_u.fmt), h_u.fmt)
    raise SpecError(f"unknown gather kind {kind!r}")


@dataclass
class ReduceState:
    """Wide per-output-vertex fold state: sum/max in int64 plus a count."""

    kind: str
    acc: np.ndarray  # int64, (outputs x dim)
    counts: np.ndarray  # int64, (outputs,)

    @classmethod
    def init(cls, kind: str, num_outputs: int, dim: int) -> "ReduceState":
        if kind not in REDUCE_KINDS:
            raise SpecError(f"unknown reduce kind {kind!r}")
        fill = I16_MIN if kind == "max" else 0
        acc = np.full((num_outputs, dim), fill, dtype=np.int64)
        return cls(kind, acc, np.zeros(num_outputs, dtype=np.int64))


def reduce_apply(state: ReduceState, msg_raw: np.ndarray, v_indices: np.ndarray):
    """Fold messages (edges x dim) into their output vertices, in place.

    Sum and max are order-independent by construction; mean carries (sum,
    count) and divides at finalize, so it is as well.
    """
    msg = np.asarray(msg_raw, dtype=np.int64)
    if msg.ndim == 1:
        msg = msg[None, :]
        v_indices = np.asarray([v_indices])
    if msg.shape[1] != state.acc.shape[1]:
        raise ShapeError("message length does not match reduce state")
    if state.kind == "max":
        np.maximum.at(state.acc, v_indices, msg)
    else:
        np.add.at(state.acc, v_indices, msg)
    np.add.at(state.counts, v_indices, 1)
    return state


def reduce_finalize(state: ReduceState) -> np.ndarray:
    """Narrow the wide fold state to 16-bit codes (the only saturation point).

    Outputs that received no message keep their initialization (zeros for
    sum/mean, format minimum for max); mean guards division by zero.
    """
    if state.kind == "mean":
        den = np.maximum(state.counts, 1)[:, None]
        return saturate16(div_rne(state.acc, den))
    return saturate16(state.acc)


def transform_raw(w_raw: np.ndarray, e_raw: np.ndarray, init_wide: np.ndarray | None,
                  col_slice: slice | None = None) -> np.ndarray:
    """Wide-accumulator matmul: init + e @ W^T, exact in int64.

    `col_slice` restricts the contraction to a slice of input columns so
    tiled execution can accumulate partial products without intermediate
    rounding (which is what makes vertex-tiling bit-invariant).
    """
    w = np.asarray(w_raw, dtype=np.int64)
    e = np.asarray(e_raw, dtype=np.int64)
    if col_slice is not None:
        w = w[:, col_slice]
        e = e[:, col_slice] if e.ndim == 2 else e[col_slice]
    wide = e @ w.T
    if init_wide is not None:
        wide = wide + init_wide
    return wide


def transform_apply(weight: FixedVec, a_v: FixedVec | None, e_v: FixedVec) -> FixedVec:
    """a_v + W @ e_v with wide accumulation and a single final rounding."""
    rows, cols = weight.raw.shape
    e2 = e_v.raw if e_v.raw.ndim == 2 else e_v.raw[None, :]
    if e2.shape[1] != cols:
        raise ShapeError(f"transform expects input dim {cols}, got {e2.shape[1]}")
    shift = weight.fmt.frac_bits
    init = None
    if a_v is not None:
        a2 = a_v.raw if a_v.raw.ndim == 2 else a_v.raw[None, :]
        if a2.shape[-1] != rows:
            raise ShapeError(f"transform expects accumulator dim {rows}, got {a2.shape[-1]}")
        init = np.asarray(a2, dtype=np.int64) << shift
    wide = transform_raw(weight.raw, e2, init)
    out = saturate16(rne_shift(wide, shift))
    return FixedVec(out if e_v.raw.ndim == 2 else out[0], e_v.fmt)


def activate_raw(kind: str, raw: np.ndarray, lut: Lut | None = None) -> np.ndarray:
    if kind == "relu":
        return np.maximum(np.asarray(raw, dtype=np.int16), 0)
    if kind == "identity":
        return np.asarray(raw, dtype=np.int16).copy()
    if kind == "lut":
        if lut is None:
            raise SpecError("lut activation without a lut")
        return lut.eval(raw)
    raise SpecError(f"unknown activate kind {kind!r}")


def activate_apply(kind: str, v: FixedVec, lut: Lut | None = None) -> FixedVec:
    return FixedVec(activate_raw(kind, v.raw, lut), v.fmt)
