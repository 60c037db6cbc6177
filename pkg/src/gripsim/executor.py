"""Reference functional executor for GReTA programs over nodeflows.

Execution follows the three-phase semantics exactly: fold gather/reduce
over the edge set, then transform per output vertex, then activate.
Partitioned nodeflows are consumed column-major with one vertex-accumulate
per column; tiled transforms accumulate wide partial sums across feature
slices. Both are bit-identical to plain execution by construction, which
the test suite asserts.

Timing never enters here; this module defines the values the timing model
must reproduce byte for byte.

Embedding files (little-endian): magic "GRIPEMB1", u64 rows, u32 dim,
u8 precision tag (0 float64, else fixed16 fractional bits), payload.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvariantError, ShapeError, SpecError
from .fxp import FEATURE_FMT, FixedVec, FxFormat, rne_shift, saturate16
from .graph import FeatureStore
from .greta import ReduceState, gather_raw, activate_raw, reduce_apply, reduce_finalize, transform_raw
from .models import NF_IDENTITY_IN, NF_LAYER, GretaProgram, ModelPlan
from .nodeflow import PartitionedNodeflow, identity_nodeflow

EMB_MAGIC = b"GRIPEMB1"


@dataclass
class ExecState:
    """Per-program execution state over one nodeflow."""

    edge_state: ReduceState  # wide e_v fold state plus message counts
    a_wide: np.ndarray | None  # int64 vertex accumulator at product scale
    z: np.ndarray | None  # final int16 output codes
    no_edge_outputs: np.ndarray | None = None  # flags vertices left at init


def _operand_rows(slots: dict, operand, edges: np.ndarray) -> np.ndarray:
    col = 0 if operand.endpoint == "src" else 1
    try:
        table = slots[operand.slot]
    except KeyError:
        raise SpecError(f"unknown feature slot {operand.slot!r}")
    idx = edges[:, col]
    if len(idx) and int(idx.max()) >= len(table):
        raise InvariantError(
            f"slot {operand.slot!r} has {len(table)} rows, edge index needs more"
        )
    return table[idx]


def _edge_accumulate(program: GretaProgram, state: ReduceState, slots: dict,
                     edges: np.ndarray):
    if len(edges) == 0:
        return
    ops = program.gather.operands
    a = _operand_rows(slots, ops[0], edges)
    b = _operand_rows(slots, ops[1], edges) if len(ops) > 1 else None
    if a.shape[1] != program.d_in or (b is not None and b.shape[1] != a.shape[1]):
        raise ShapeError(f"{program.name}: gather operand width mismatch")
    msgs = gather_raw(program.gather.kind, a, b, program.gather.const)
    reduce_apply(state, msgs, edges[:, 1])


def _vertex_phase(program: GretaProgram, e16: np.ndarray, weights: dict, luts: dict,
                  routed_va: np.ndarray | None, tiling=None) -> np.ndarray:
    """Transform then activate for a batch of output vertices."""
    if program.transform is None:
        if routed_va is not None:
            raise SpecError(f"{program.name}: vertex-acc routing needs a transform")
        a16 = e16
    else:
        w = weights[program.transform.weight]
        shift = w.fmt.frac_bits
        rows, cols = w.raw.shape
        if cols != program.d_in or rows != program.d_out:
            raise ShapeError(f"{program.name}: weight shape {w.raw.shape} mismatch")
        wide = np.zeros((len(e16), rows), dtype=np.int64)
        if program.transform.bias is not None:
            bias = weights[program.transform.bias]
            wide += np.asarray(bias.raw, dtype=np.int64)[None, :] << shift
        if routed_va is not None:
            wide += np.asarray(routed_va, dtype=np.int64) << shift
        f_tile, m_tile = tiling if tiling else (0, 0)
        f_tile = f_tile or cols
        m_tile = m_tile or len(e16)
        # Wide partials carry across feature slices and vertex tiles, so the
        # tiled schedule rounds exactly once per element, same as untiled.
        for lo_v in range(0, len(e16), m_tile):
            rows_sl = slice(lo_v, min(lo_v + m_tile, len(e16)))
            for lo_f in range(0, cols, f_tile):
                col_sl = slice(lo_f, min(lo_f + f_tile, cols))
                wide[rows_sl] += transform_raw(w.raw, e16[rows_sl], None, col_sl)
        a16 = saturate16(rne_shift(wide, shift))
    lut = luts.get(program.activate.lut) if program.activate.kind == "lut" else None
    if program.activate.kind == "lut" and lut is None:
        raise SpecError(f"{program.name}: unresolved lut {program.activate.lut!r}")
    return activate_raw(program.activate.kind, a16, lut)


def exec_program(
    program: GretaProgram,
    nf,
    slots: dict,
    weights: dict,
    luts: dict | None = None,
    routed_va: np.ndarray | None = None,
    routed_ea: np.ndarray | None = None,
    tiling=None,
) -> ExecState:
    """Execute one program over a LayerNodeflow or PartitionedNodeflow.

    `slots` maps feature slot names to int16 row tables aligned with the
    nodeflow input set. Routed accumulator initializations come from
    earlier programs in the plan. Returns the full ExecState; `.z` holds
    the output codes aligned with the nodeflow output set.
    """
    luts = luts or {}
    partitioned = isinstance(nf, PartitionedNodeflow)
    base = nf.parent if partitioned else nf
    n_out = base.num_outputs

    state = ReduceState.init(program.reduce, n_out, program.d_in)
    if routed_ea is not None:
        if program.reduce == "mean":
            raise SpecError(f"{program.name}: edge-acc routing into mean reduce")
        state.acc[:] = np.asarray(routed_ea, dtype=np.int64)

    z = np.zeros((n_out, program.d_out), dtype=np.int16)
    if partitioned:
        # Column-major consumption: all blocks of a column feed the reduce
        # state, then that column's outputs run vertex-accumulate/update once.
        for j in range(nf.num_output_chunks):
            for i in range(nf.num_input_chunks):
                _edge_accumulate(program, state, slots, nf.block_edges(i, j))
            sl = nf.output_chunk_slice(j)
            e16 = reduce_finalize_slice(state, sl)
            va = routed_va[sl] if routed_va is not None else None
            z[sl] = _vertex_phase(program, e16, weights, luts, va, tiling)
    else:
        _edge_accumulate(program, state, slots, base.edges)
        e16 = reduce_finalize(state)
        z[:] = _vertex_phase(program, e16, weights, luts, routed_va, tiling)

    a_wide = None  # narrowed inside _vertex_phase; kept for interface parity
    return ExecState(state, a_wide, z, no_edge_outputs=state.counts == 0)


def reduce_finalize_slice(state: ReduceState, sl: slice) -> np.ndarray:
    sub = ReduceState(state.kind, state.acc[sl], state.counts[sl])
    return reduce_finalize(sub)


def exec_model(
    plan: ModelPlan,
    nfs: list,
    feats: FeatureStore,
    chunk=None,
    tiling=None,
) -> FixedVec:
    """Run a full plan over per-layer nodeflows; returns target embeddings.

    `chunk=(Nc, Mc)` partitions every program's nodeflow; `tiling=(f, m)`
    tiles every transform. Both leave the result bit-identical.
    """
    from .nodeflow import partition_nodeflow

    if len(nfs) != plan.num_layers:
        raise SpecError(
            f"plan has {plan.num_layers} layers, got {len(nfs)} nodeflows"
        )
    store = feats.quantized()
    h = np.asarray(store.values, dtype=np.int16)[nfs[0].u_ids]
    for layer in range(plan.num_layers):
        nf = nfs[layer]
        # Identity-output programs and layer chaining read output-vertex rows
        # at input positions 0..|V|-1, which requires the builder's layout.
        if not nf.identity and not np.array_equal(nf.u_ids[: nf.num_outputs], nf.v_ids):
            raise SpecError("nodeflow outputs must form the prefix of its inputs")
        slots = {"h": h}
        pending_va: dict = {}
        pending_ea: dict = {}
        for program in plan.layer_programs(layer):
            if program.nodeflow == NF_LAYER:
                resolved = nf
            elif program.nodeflow == NF_IDENTITY_IN:
                resolved = identity_nodeflow(nf.u_ids)
            else:
                resolved = identity_nodeflow(nf.v_ids)
            if chunk is not None:
                resolved = partition_nodeflow(resolved, chunk[0], chunk[1])
            st = exec_program(
                program,
                resolved,
                slots,
                plan.weights,
                plan.luts,
                routed_va=pending_va.pop(program.name, None),
                routed_ea=pending_ea.pop(program.name, None),
                tiling=tiling,
            )
            kind, target = program.route
            if kind == "feature":
                slots[target] = st.z
            elif kind == "vertex-acc":
                pending_va[target] = st.z
            else:
                pending_ea[target] = st.z
        if pending_va or pending_ea:
            raise InvariantError("unconsumed accumulator routing")
        h = slots["z"]
    return FixedVec(h, FEATURE_FMT)


@dataclass
class ErrorReport:
    """Elementwise absolute-difference summary between two embeddings."""

    max_abs: float
    mean_abs: float
    worst_index: tuple
    tolerance: float
    passed: bool

    def __str__(self):
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"max={self.max_abs:.3e} mean={self.mean_abs:.3e} "
            f"worst={self.worst_index} tol={self.tolerance:.3e} [{verdict}]"
        )


def compare_outputs(a, b, tol: float) -> ErrorReport:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if diff.size == 0:
        return ErrorReport(0.0, 0.0, (), tol, True)
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    max_abs = float(diff[worst])
    return ErrorReport(max_abs, float(diff.mean()), worst, tol, max_abs <= tol)


def save_embeddings(emb, path, fmt: FxFormat | None = FEATURE_FMT):
    """Write embeddings; pass fmt=None to store float64."""
    if isinstance(emb, FixedVec):
        raw, fmt = emb.raw, emb.fmt
    else:
        raw = np.asarray(emb)
    rows, dim = raw.shape
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        if fmt is None:
            fh.write(struct.pack("<QIB", rows, dim, 0))
            fh.write(raw.astype("<f8").tobytes())
        else:
            fh.write(struct.pack("<QIB", rows, dim, fmt.frac_bits))
            fh.write(raw.astype("<i2").tobytes())


def load_embeddings(path):
    """Returns (array, fmt): int16 codes with their format, or (f64, None)."""
    with open(path, "rb") as fh:
        if fh.read(8) != EMB_MAGIC:
            raise DataError("not an embeddings file")
        rows, dim, tag = struct.unpack("<QIB", fh.read(13))
        if tag == 0:
            data = np.frombuffer(fh.read(8 * rows * dim), dtype="<f8")
            return data.reshape(rows, dim).copy(), None
        data = np.frombuffer(fh.read(2 * rows * dim), dtype="<i2")
        return data.reshape(rows, dim).copy(), FxFormat(16 - tag, tag)
