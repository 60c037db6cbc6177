"""Architecture parameter records, presets, and the config file format.

The default configuration models the reference implementation: 1 GHz, four
DDR4-2400 channels (19.2 bytes/cycle each), a 4+4-lane edge unit with a
32-element crossbar port, one 16x32 weight-stationary matrix unit with a
6-cycle pipeline latency, 4x20 KiB nodeflow banks, 2x64 KiB tile buffer,
a 2 MiB global weight buffer at 128 bytes/cycle, and vertex tiling of 64
elements by 12 vertices (a 1.5 KiB accumulator tile).

Emulation presets reproduce prior-work bottlenecks by toggling the same
knobs: merged SRAM with capped per-lane reads (cpu-like baseline), single
fetch/gather lane with a 256-wide crossbar and no tiling (hygcn-like), an
off-chip 30 B/cycle weight path into a systolic array (tpu-plus), and a
split vertex unit sharing one tile-buffer port with no tiling
(graphicionado-like).

Config files are flat "key = value" text; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import SpecError

ELEM_BYTES = 2  # 16-bit values everywhere

PRESETS = (
    "grip-default",
    "baseline-emulation",
    "hygcn-like",
    "tpu-plus",
    "graphicionado-like",
)


@dataclass
class ArchConfig:
    clock_hz: float = 1.0e9

    # DRAM: per-channel bandwidth, burst granularity, fixed and random-access
    # latency. A bandwidth-latency-penalty model, not a DRAM simulator.
    dram_channels: int = 4
    dram_bw_bytes_per_cycle: float = 19.2
    dram_burst_bytes: int = 64
    dram_access_latency: int = 40
    dram_random_penalty: int = 20

    # Edge unit: replicated prefetch/reduce lanes joined by an N x M crossbar.
    prefetch_lanes: int = 4
    reduce_lanes: int = 4
    xbar_port_elems: int = 32
    edge_fill_cycles: int = 7  # P0-P2 + R1-R4; R0 adds one when enabled

    # Vertex unit: vu_count independent arrays of vu_rows x vu_cols PEs.
    vu_count: int = 1
    vu_rows: int = 16
    vu_cols: int = 32
    vu_fill_cycles: int = 6  # broadcast distribute + multiply + reduce tree
    vu_systolic: bool = False  # fill becomes rows + cols (input skew)
    vu_block_split: bool = False  # two half-arrays sharing one weight port

    # Update unit throughput.
    update_width_elems: int = 16

    # Weight path: on-chip global buffer, or a dedicated off-chip stream.
    weights_on_chip: bool = True
    weight_bw_bytes_per_cycle: float = 128.0

    # Buffers.
    nodeflow_kib: int = 20
    nodeflow_banks: int = 4
    tile_kib: int = 64
    tile_banks: int = 2
    weight_buffer_kib: int = 2048

    # Baseline-emulation SRAM model.
    merged_sram: bool = False
    sram_bw_per_lane_bytes: float = 0.0  # 0 = unconstrained

    # Optimization toggles.
    pipeline_partitions: bool = True
    pipeline_update: bool = True
    cache_partition_features: bool = True
    preload_weights: bool = True
    tiling_f: int = 64  # 0 disables feature slicing
    tiling_m: int = 12  # 1 disables vertex tiling

    # Nodeflow chunk sizes; 0 = derive the largest that fits the buffers.
    chunk_in: int = 0
    chunk_out: int = 0

    def validate(self) -> "ArchConfig":
        positive = (
            "clock_hz", "dram_channels", "dram_bw_bytes_per_cycle",
            "dram_burst_bytes", "prefetch_lanes", "reduce_lanes",
            "xbar_port_elems", "vu_count", "vu_rows", "vu_cols",
            "update_width_elems", "weight_bw_bytes_per_cycle",
            "nodeflow_kib", "nodeflow_banks", "tile_kib", "tile_banks",
            "weight_buffer_kib",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise SpecError(f"{name} must be positive")
        for name in ("dram_access_latency", "dram_random_penalty",
                     "edge_fill_cycles", "vu_fill_cycles", "chunk_in", "chunk_out"):
            if getattr(self, name) < 0:
                raise SpecError(f"{name} must be non-negative")
        if self.tiling_f < 0 or self.tiling_m < 1:
            raise SpecError("tiling requires f >= 0 and m >= 1")
        return self

    @property
    def dram_total_bw(self) -> float:
        return self.dram_channels * self.dram_bw_bytes_per_cycle

    @property
    def nodeflow_capacity_bytes(self) -> int:
        return self.nodeflow_kib * 1024 * self.nodeflow_banks

    @property
    def weight_buffer_bytes(self) -> int:
        return self.weight_buffer_kib * 1024

    @property
    def vu_fill(self) -> int:
        return (self.vu_rows + self.vu_cols) if self.vu_systolic else self.vu_fill_cycles

    @property
    def effective_weight_bw(self) -> float:
        # Merging weight and nodeflow memories halves the usable weight rate.
        return self.weight_bw_bytes_per_cycle / (2.0 if self.merged_sram else 1.0)

    def replace(self, **kwargs) -> "ArchConfig":
        return dataclasses.replace(self, **kwargs).validate()


def apply_preset(name: str) -> ArchConfig:
    """A fully populated ArchConfig for a named machine emulation."""
    if name == "grip-default":
        cfg = ArchConfig()
        # The reference design ties prefetch lanes to DRAM channels.
        assert cfg.prefetch_lanes == cfg.dram_channels
        return cfg.validate()
    if name == "baseline-emulation":
        return ArchConfig(
            prefetch_lanes=14,
            reduce_lanes=14,
            xbar_port_elems=16,  # 32-byte crossbar
            vu_count=14,
            vu_rows=8,
            vu_cols=2,
            merged_sram=True,
            sram_bw_per_lane_bytes=16.0,
            pipeline_partitions=False,
            pipeline_update=False,
            preload_weights=False,
            tiling_f=0,
            tiling_m=1,
        ).validate()
    if name == "hygcn-like":
        return ArchConfig(
            prefetch_lanes=1,
            reduce_lanes=1,
            xbar_port_elems=256,
            tiling_f=0,
            tiling_m=1,
        ).validate()
    if name == "tpu-plus":
        return ArchConfig(
            prefetch_lanes=1,
            reduce_lanes=1,
            vu_systolic=True,
            weights_on_chip=False,
            weight_bw_bytes_per_cycle=30.0,
        ).validate()
    if name == "graphicionado-like":
        return ArchConfig(
            vu_block_split=True,
            tiling_f=0,
            tiling_m=1,
        ).validate()
    raise SpecError(f"unknown preset {name!r}; expected one of {PRESETS}")


def breakdown_configs() -> list:
    """The progressive feature chain from the cpu-like baseline to the full
    design: split SRAMs, then the edge unit (lanes, crossbar, partition
    pipelining, weight preload, and the tiles it produces for vertex
    tiling), then the single wide vertex unit, then update pipelining."""
    base = apply_preset("baseline-emulation")
    split = base.replace(merged_sram=False, sram_bw_per_lane_bytes=0.0)
    edge = split.replace(
        prefetch_lanes=4,
        reduce_lanes=4,
        xbar_port_elems=32,
        pipeline_partitions=True,
        preload_weights=True,
        tiling_f=64,
        tiling_m=12,
    )
    vertex = edge.replace(vu_count=1, vu_rows=16, vu_cols=32)
    update = vertex.replace(pipeline_update=True)
    return [
        ("baseline-emulation", base),
        ("split-sram", split),
        ("edge-unit", edge),
        ("vertex-unit", vertex),
        ("update-pipelining", update),
    ]


_FIELDS = {f.name: f for f in dataclasses.fields(ArchConfig)}


def _coerce(name: str, value: str):
    if name not in _FIELDS:
        raise SpecError(f"unknown ArchConfig key {name!r}")
    target = _FIELDS[name].type
    text = value.strip()
    if target == "bool" or isinstance(_FIELDS[name].default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise SpecError(f"{name} expects a boolean, got {value!r}")
    if isinstance(_FIELDS[name].default, int):
        try:
            return int(text)
        except ValueError:
            raise SpecError(f"{name} expects an integer, got {value!r}")
    try:
        return float(text)
    except ValueError:
        raise SpecError(f"{name} expects a number, got {value!r}")


def apply_overrides(cfg: ArchConfig, overrides: dict) -> ArchConfig:
    """Apply string key=value overrides (CLI --set / sweep axes)."""
    coerced = {name: _coerce(name, str(val)) for name, val in overrides.items()}
    return cfg.replace(**coerced)


def serialize_config(cfg: ArchConfig) -> str:
    lines = ["# gripsim architecture configuration"]
    for f in dataclasses.fields(ArchConfig):
        lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, base: ArchConfig | None = None) -> ArchConfig:
    cfg = base or ArchConfig()
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise SpecError(f"config line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        overrides[key.strip()] = value.strip()
    return apply_overrides(cfg, overrides)


def load_config(path, base: ArchConfig | None = None) -> ArchConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), base)
