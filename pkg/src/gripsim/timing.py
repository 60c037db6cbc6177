"""Deterministic cycle-approximate performance model.

Each command's cost comes from an analytic unit model; the engine then
replays the stream in issue order with barrier groups, letting commands on
different units overlap inside a group while commands on one unit
serialize. Identical inputs always produce identical reports, and the
functional result never depends on the configuration (values are computed
by the functional executor, timing only decides when).

Unit cost rules:
  dram    A load of R rows of W bytes each costs access latency plus bus
          occupancy at channels x per-channel bandwidth, with bursts
          rounded up to the burst size; rows narrower than one burst add a
          per-row random-access penalty.
  edge    Each prefetch lane consumes one edge per cycle (or at the capped
          SRAM rate when the buffers are merged); each reduce lane moves
          one crossbar port width per cycle. Lanes own disjoint vertex
          partitions, so the block cost is the busiest-lane bound plus the
          pipeline fill (one extra stage when R0 is enabled).
  vertex  A weight-stationary array streams one input column per cycle,
          fully pipelined across tiles, after a fixed fill (6 cycles for
          the broadcast/reduce design, rows+cols for a systolic array).
          Weight slabs stream at the weight-port bandwidth; with the tile
          buffer double-buffered (preload_weights) they hide under compute
          and the program's first slab is preloaded, otherwise (or with
          merged SRAMs) they serialize with it. Vertex tiling reads each
          slab once per m output vertices.
  update  Activation and write-back at a fixed element width per cycle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .arch import ELEM_BYTES, ArchConfig
from .errors import SpecError
from .graph import FeatureStore, Graph, attach_features
from .models import ModelPlan
from .nodeflow import build_nodeflow
from .executor import exec_model
from .schedule import (
    BARRIER,
    Command,
    CommandStream,
    LOAD_FEATURES,
    LOAD_WEIGHTS,
    RUN_EDGE,
    RUN_UPDATE,
    RUN_VERTEX,
    build_command_stream,
    partition_for_plan,
)

UNITS = ("dram", "edge", "vertex", "update")
PHASES = ("load", "edge_accumulate", "vertex_accumulate", "update")


@dataclass
class TimingReport:
    total_cycles: int
    clock_hz: float
    per_unit: dict  # unit -> {"busy": cycles, "stall": cycles}
    per_phase: dict  # phase -> cycles (sum of command costs)
    dram_bytes: int
    weight_bytes: int

    @property
    def latency_us(self) -> float:
        return self.total_cycles / self.clock_hz * 1e6

    def to_dict(self) -> dict:
        return {
            "total_cycles": int(self.total_cycles),
            "latency_us": self.latency_us,
            "per_unit": self.per_unit,
            "per_phase": self.per_phase,
            "dram_bytes": int(self.dram_bytes),
            "weight_bytes": int(self.weight_bytes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _ceil_div(a: int, b: float) -> int:
    return int(math.ceil(a / b))


def dram_load_cycles(cfg: ArchConfig, rows: int, row_bytes: int) -> int:
    """Bulk feature transfer: latency + striped bus occupancy + penalties."""
    bursts_per_row = max(1, _ceil_div(row_bytes, cfg.dram_burst_bytes))
    bus_bytes = rows * bursts_per_row * cfg.dram_burst_bytes
    cycles = cfg.dram_access_latency + _ceil_div(bus_bytes, cfg.dram_total_bw)
    if row_bytes < cfg.dram_burst_bytes:
        # Sub-burst rows land as scattered accesses; each pays the penalty.
        cycles += cfg.dram_random_penalty * rows
    return cycles


def weight_load_cycles(cfg: ArchConfig, nbytes: int) -> int:
    return cfg.dram_access_latency + _ceil_div(nbytes, cfg.dram_total_bw)


def edge_block_cycles(cfg: ArchConfig, cmd: Command) -> int:
    per_edge_port = max(1, _ceil_div(cmd.elems, cfg.xbar_port_elems))
    if cfg.sram_bw_per_lane_bytes > 0:
        per_edge_prefetch = max(1, _ceil_div(cmd.elems * ELEM_BYTES, cfg.sram_bw_per_lane_bytes))
    else:
        per_edge_prefetch = 1
    # Balanced assignment across lanes, but a single vertex's edges stay on
    # one lane, so the busiest vertex lower-bounds each side.
    prefetch = max(
        _ceil_div(cmd.edges, cfg.prefetch_lanes) * per_edge_prefetch,
        cmd.max_per_input * per_edge_prefetch,
    )
    reduce_side = max(
        _ceil_div(cmd.edges * per_edge_port, cfg.reduce_lanes),
        cmd.max_per_output * per_edge_port,
    )
    fill = cfg.edge_fill_cycles + (1 if cmd.needs_r0 else 0)
    return fill + max(prefetch, reduce_side)


def vertex_cycles(cfg: ArchConfig, cmd: Command) -> tuple:
    """Returns (cycles, weight_bytes_read) for one vertex-accumulate command."""
    live = cmd.rows
    width = cmd.elems
    d_out = cmd.d_out
    m = max(1, cfg.tiling_m)
    mtiles = _ceil_div(live, m)
    padded = mtiles * m  # dummy slots beyond the live outputs still stream

    # Weight reuse follows the tiling config: each f x d_out slab is read
    # once per m-vertex tile. Without tiling (m = 1, full-vector
    # accumulation) every vertex streams its own copy.
    if cfg.vu_count > 1:
        # Independent small units each take a share of the vertices.
        per_vertex = _ceil_div(width, cfg.vu_rows) * _ceil_div(d_out, cfg.vu_cols)
        compute = _ceil_div(live, cfg.vu_count) * per_vertex
        slab_streams = mtiles
    elif cfg.vu_block_split:
        # Two half-arrays on different vertices sharing one weight port:
        # same multiply throughput, duplicated weight traffic.
        per_pair = _ceil_div(width, cfg.vu_rows) * _ceil_div(d_out, cfg.vu_cols // 2)
        compute = _ceil_div(padded, 2) * per_pair
        slab_streams = 2 * mtiles
    else:
        compute = padded * _ceil_div(width, cfg.vu_rows) * _ceil_div(d_out, cfg.vu_cols)
        slab_streams = mtiles
    compute = cfg.vu_fill + max(0, compute - 1)

    slab_bytes = width * d_out * ELEM_BYTES
    weight_bytes = slab_streams * slab_bytes
    timed_streams = slab_streams
    if cmd.first_of_program and cfg.preload_weights and timed_streams:
        # The tile buffer is preloaded before the first column, hiding the
        # first slab transfer of the program.
        timed_streams -= 1
    weight_time = _ceil_div(timed_streams * slab_bytes, cfg.effective_weight_bw)
    if cfg.merged_sram or not cfg.preload_weights:
        # Without tile double-buffering (or with weight and feature traffic
        # contending for one merged SRAM), slab transfers cannot hide
        # behind compute.
        cycles = compute + weight_time
    else:
        cycles = max(compute, weight_time)
    return cycles, weight_bytes


def update_cycles(cfg: ArchConfig, cmd: Command) -> int:
    return max(1, _ceil_div(cmd.rows * cmd.elems, cfg.update_width_elems))


def command_cost(cfg: ArchConfig, cmd: Command) -> tuple:
    """Returns (cycles, dram_bytes, weight_bytes) for one command."""
    if cmd.kind == LOAD_FEATURES:
        return dram_load_cycles(cfg, cmd.rows, cmd.elems * ELEM_BYTES), cmd.bytes, 0
    if cmd.kind == LOAD_WEIGHTS:
        return weight_load_cycles(cfg, cmd.bytes), cmd.bytes, 0
    if cmd.kind == RUN_EDGE:
        return edge_block_cycles(cfg, cmd), 0, 0
    if cmd.kind == RUN_VERTEX:
        cycles, wbytes = vertex_cycles(cfg, cmd)
        dram = 0 if cfg.weights_on_chip else wbytes
        return cycles, dram, wbytes
    if cmd.kind == RUN_UPDATE:
        return update_cycles(cfg, cmd), 0, 0
    raise SpecError(f"cannot cost command kind {cmd.kind!r}")


def simulate(stream: CommandStream, cfg: ArchConfig, pnfs=None, plan=None) -> TimingReport:
    """Replay the stream: in-order issue, per-unit serialization, barriers.

    Within a barrier group, commands on distinct units overlap; a barrier
    releases only when everything issued before it has completed. With all
    pipelining disabled the builder barriers every command, making the
    total exactly the sum of command costs.
    """
    unit_free = {u: 0 for u in UNITS}
    busy = {u: 0 for u in UNITS}
    phase = {p: 0 for p in PHASES}
    group_start = 0
    horizon = 0
    dram_bytes = 0
    weight_bytes = 0
    for cmd in stream:
        if cmd.kind == BARRIER:
            group_start = horizon
            continue
        cycles, dbytes, wbytes = command_cost(cfg, cmd)
        start = max(group_start, unit_free[cmd.unit])
        end = start + cycles
        unit_free[cmd.unit] = end
        horizon = max(horizon, end)
        busy[cmd.unit] += cycles
        phase[cmd.phase] += cycles
        dram_bytes += dbytes
        weight_bytes += wbytes
    total = horizon
    per_unit = {
        u: {"busy": int(busy[u]), "stall": int(total - busy[u])} for u in UNITS
    }
    return TimingReport(
        total_cycles=int(total),
        clock_hz=cfg.clock_hz,
        per_unit=per_unit,
        per_phase={p: int(c) for p, c in phase.items()},
        dram_bytes=dram_bytes,
        weight_bytes=weight_bytes,
    )


def run_timed_inference(
    plan: ModelPlan,
    graph: Graph,
    targets,
    cfg: ArchConfig,
    seed: int,
    feats: FeatureStore | None = None,
    nfs: list | None = None,
) -> tuple:
    """Full pipeline: sample, execute bit-exactly, and predict latency.

    The embeddings come from the functional executor and are identical for
    every ArchConfig; the report reflects the configured schedule.
    """
    if feats is None:
        feats = attach_features(graph, plan.layer_dims[0][0], seed=seed)
    if nfs is None:
        nfs = build_nodeflow(graph, targets, plan.sample_sizes, seed, plan.include_self)
    emb = exec_model(plan, nfs, feats)
    pnfs = partition_for_plan(plan, nfs, cfg)
    stream = build_command_stream(plan, pnfs, cfg)
    report = simulate(stream, cfg, pnfs, plan)
    return emb, report
