"""Experiment harness: end-to-end runs, latency distributions, parameter
sweeps, optimization ablations, and preset comparisons.

Every experiment is a pure function of its spec and seed: target vertices
are drawn from seeded streams, sweep points run in a worker pool over
shared immutable inputs, and results are aggregated order-independently
then sorted. CSV schemas are fixed and documented next to each writer.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .arch import ArchConfig, apply_preset, apply_overrides, breakdown_configs
from .errors import SpecError
from .graph import Graph, attach_features, generate_synthetic, load_graph
from .models import DEFAULT_DIMS, DEFAULT_SAMPLE_SIZES, build_model_program, generate_weights
from .nodeflow import build_nodeflow
from .timing import run_timed_inference

PRIOR_WORK_PRESETS = ("hygcn-like", "tpu-plus", "graphicionado-like")

# Sweep axes: any ArchConfig field, the coupled/virtual axes below, or a
# model dimension. dram_channels keeps the edge-unit lane counts equal to
# the channel count; matmul_tops resizes the PE array (1.0 = 16x32).
MATMUL_TOPS_SHAPES = {
    0.5: (16, 16),
    1.0: (16, 32),
    2.0: (16, 64),
    4.0: (32, 64),
    8.0: (32, 128),
}
MODEL_AXES = ("feature_dim", "hidden_dim", "output_dim")


@dataclass
class ExperimentSpec:
    """Everything needed to reproduce one experiment."""

    model: str = "gcn"
    graph_path: str | None = None
    synthetic: tuple | None = ("power-law", 10000, 30)  # (kind, n, avg_degree)
    dims: tuple = DEFAULT_DIMS
    sample_sizes: tuple = DEFAULT_SAMPLE_SIZES
    preset: str = "grip-default"
    overrides: dict = field(default_factory=dict)
    targets: list | None = None
    samples: int = 100  # latency-distribution sample count
    sweep: list = field(default_factory=list)  # [(axis, [values])]
    seed: int = 0
    workers: int = 4

    def validate(self) -> "ExperimentSpec":
        for axis, values in self.sweep:
            _check_axis(axis)
            if not values:
                raise SpecError(f"sweep axis {axis!r} has no values")
        if len(self.sweep) > 2:
            raise SpecError("at most two sweep axes are supported")
        return self


def _check_axis(axis: str):
    import dataclasses

    arch_fields = {f.name for f in dataclasses.fields(ArchConfig)}
    if axis not in arch_fields and axis != "matmul_tops" and axis not in MODEL_AXES:
        raise SpecError(
            f"unknown sweep axis {axis!r}; expected an ArchConfig field, "
            f"'matmul_tops', or one of {MODEL_AXES}"
        )


def resolve_config(spec: ExperimentSpec) -> ArchConfig:
    return apply_overrides(apply_preset(spec.preset), spec.overrides)


def load_spec_graph(spec: ExperimentSpec) -> Graph:
    if spec.graph_path:
        return load_graph(spec.graph_path)
    kind, n, deg = spec.synthetic
    return generate_synthetic(kind, int(n), int(deg), spec.seed)


def build_plan(spec: ExperimentSpec, dims=None):
    plan = build_model_program(spec.model, dims or spec.dims, spec.sample_sizes)
    return generate_weights(plan, spec.seed)


def pick_targets(spec: ExperimentSpec, graph: Graph, count: int) -> np.ndarray:
    if spec.targets is not None:
        return np.asarray(spec.targets, dtype=np.int64)
    gen = rng.stream(spec.seed, rng.TAG_ROOTS, count)
    return gen.integers(0, graph.num_vertices, size=count, dtype=np.int64)


def _apply_axis(cfg: ArchConfig, axis: str, value) -> ArchConfig:
    if axis == "matmul_tops":
        key = float(value)
        if key not in MATMUL_TOPS_SHAPES:
            raise SpecError(
                f"matmul_tops supports {sorted(MATMUL_TOPS_SHAPES)}, got {value}"
            )
        rows, cols = MATMUL_TOPS_SHAPES[key]
        return cfg.replace(vu_rows=rows, vu_cols=cols)
    if axis == "dram_channels":
        ch = int(value)
        return cfg.replace(dram_channels=ch, prefetch_lanes=ch, reduce_lanes=ch)
    return apply_overrides(cfg, {axis: value})


def _axis_dims(spec: ExperimentSpec, axis: str, value) -> tuple:
    d_in, hidden, d_out = spec.dims
    if axis == "feature_dim":
        return (int(value), hidden, d_out)
    if axis == "hidden_dim":
        return (d_in, int(value), d_out)
    return (d_in, hidden, int(value))


def cmd_run(spec: ExperimentSpec):
    """Single end-to-end inference; returns (embeddings, report, targets)."""
    graph = load_spec_graph(spec)
    plan = build_plan(spec)
    cfg = resolve_config(spec)
    feats = attach_features(graph, spec.dims[0], seed=spec.seed)
    targets = pick_targets(spec, graph, count=1)
    emb, report = run_timed_inference(plan, graph, targets, cfg, spec.seed, feats)
    return emb, report, targets


# CSV schema: one record per sampled target vertex.
LATENCY_HEADER = ["vertex_id", "neighborhood_size", "total_cycles", "latency_us"]


@dataclass
class LatencySummary:
    min_us: float
    median_us: float
    p99_us: float
    records: list  # rows matching LATENCY_HEADER

    def validate(self):
        assert self.min_us <= self.median_us <= self.p99_us
        return self

    def to_dict(self):
        return {
            "min_us": self.min_us,
            "median_us": self.median_us,
            "p99_us": self.p99_us,
            "samples": len(self.records),
        }


def cmd_latency_dist(spec: ExperimentSpec) -> LatencySummary:
    """Batch-size-1 inference for `spec.samples` sampled target vertices."""
    graph = load_spec_graph(spec)
    plan = build_plan(spec)
    cfg = resolve_config(spec)
    feats = attach_features(graph, spec.dims[0], seed=spec.seed)
    targets = pick_targets(spec, graph, count=spec.samples)

    def one(v: int):
        nfs = build_nodeflow(graph, [v], plan.sample_sizes, spec.seed, plan.include_self)
        _, report = run_timed_inference(plan, graph, [v], cfg, spec.seed, feats, nfs=nfs)
        return (int(v), int(nfs[0].num_inputs), report.total_cycles, report.latency_us)

    with ThreadPoolExecutor(max_workers=max(1, spec.workers)) as pool:
        records = list(pool.map(one, [int(v) for v in targets]))
    records.sort()
    lat = np.array([r[3] for r in records])
    return LatencySummary(
        min_us=float(lat.min()),
        median_us=float(np.median(lat)),
        p99_us=float(np.percentile(lat, 99)),
        records=records,
    ).validate()


# CSV schema for sweeps: axis columns, then timing columns.
SWEEP_TIMING_COLS = [
    "total_cycles",
    "latency_us",
    "load_cycles",
    "edge_accumulate_cycles",
    "vertex_accumulate_cycles",
    "update_cycles",
    "dram_bytes",
    "weight_bytes",
]


def cmd_sweep(spec: ExperimentSpec) -> tuple:
    """One simulation per sweep point over shared nodeflows.

    Returns (header, rows) where rows are sorted by axis value(s). Arch
    axes reuse the same graph, plan, and nodeflows; model-dimension axes
    rebuild the plan (and features when the input dim changes).
    """
    if not spec.sweep:
        raise SpecError("sweep requires at least one axis")
    graph = load_spec_graph(spec)
    base_cfg = resolve_config(spec)
    targets = pick_targets(spec, graph, count=1)
    base_plan = build_plan(spec)
    base_feats = attach_features(graph, spec.dims[0], seed=spec.seed)

    axes = spec.sweep
    combos = [(a,) for a in axes[0][1]]
    if len(axes) == 2:
        combos = [(a, b) for a in axes[0][1] for b in axes[1][1]]

    def one(combo):
        cfg = base_cfg
        plan, feats = base_plan, base_feats
        for (axis, _), value in zip(axes, combo):
            if axis in MODEL_AXES:
                dims = _axis_dims(spec, axis, value)
                plan = build_plan(spec, dims=dims)
                feats = (
                    base_feats
                    if dims[0] == spec.dims[0]
                    else attach_features(graph, dims[0], seed=spec.seed)
                )
            else:
                cfg = _apply_axis(cfg, axis, value)
        _, report = run_timed_inference(plan, graph, targets, cfg, spec.seed, feats)
        ph = report.per_phase
        return list(combo) + [
            report.total_cycles,
            report.latency_us,
            ph["load"],
            ph["edge_accumulate"],
            ph["vertex_accumulate"],
            ph["update"],
            report.dram_bytes,
            report.weight_bytes,
        ]

    with ThreadPoolExecutor(max_workers=max(1, spec.workers)) as pool:
        rows = list(pool.map(one, combos))
    rows.sort(key=lambda r: tuple(float(v) for v in r[: len(axes)]))
    header = [axis for axis, _ in axes] + SWEEP_TIMING_COLS
    return header, rows


COMPARE_HEADER = ["config", "total_cycles", "latency_us", "speedup_vs_baseline"]


def cmd_compare_presets(spec: ExperimentSpec) -> tuple:
    """Baseline, the progressive feature chain, and the prior-work presets.

    The baseline latency is recomputed in-run and never cached; speedups
    are relative to it. Returns (header, rows) in execution order.
    """
    graph = load_spec_graph(spec)
    plan = build_plan(spec)
    feats = attach_features(graph, spec.dims[0], seed=spec.seed)
    targets = (
        np.asarray(spec.targets, dtype=np.int64)
        if spec.targets is not None
        else pick_targets(spec, graph, count=16)
    )

    runs = list(breakdown_configs())
    runs += [(name, apply_overrides(apply_preset(name), spec.overrides))
             for name in PRIOR_WORK_PRESETS]
    runs.append(("grip-default", apply_overrides(apply_preset("grip-default"), spec.overrides)))

    def one(item):
        name, cfg = item
        _, report = run_timed_inference(plan, graph, targets, cfg, spec.seed, feats)
        return name, report

    with ThreadPoolExecutor(max_workers=max(1, spec.workers)) as pool:
        results = list(pool.map(one, runs))
    baseline_cycles = results[0][1].total_cycles
    rows = [
        [name, rep.total_cycles, rep.latency_us, baseline_cycles / rep.total_cycles]
        for name, rep in results
    ]
    return COMPARE_HEADER, rows


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def rows_to_json(header, rows) -> str:
    return json.dumps([dict(zip(header, row)) for row in rows], indent=2)
