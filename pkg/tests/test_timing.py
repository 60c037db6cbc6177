import json

import numpy as np
import pytest

from gripsim.arch import (
    PRESETS,
    apply_overrides,
    apply_preset,
    breakdown_configs,
    load_config,
    parse_config,
    serialize_config,
)
from gripsim.errors import SpecError
from gripsim.graph import attach_features, generate_synthetic
from gripsim.models import build_model_program, generate_weights
from gripsim.nodeflow import build_nodeflow
from gripsim.schedule import Command, RUN_VERTEX, build_command_stream, partition_for_plan
from gripsim.timing import run_timed_inference, simulate, vertex_cycles


@pytest.fixture(scope="module")
def workload():
    g = generate_synthetic("uniform-random", 300, 8, seed=11)
    plan = generate_weights(build_model_program("gcn", (64, 48, 32), (6, 4)), seed=11)
    feats = attach_features(g, 64, seed=11)
    return g, plan, feats


def run(workload, cfg, targets=(3, 4, 5)):
    g, plan, feats = workload
    return run_timed_inference(plan, g, list(targets), cfg, seed=2, feats=feats)


def test_single_matrix_vector_is_six_cycles():
    cfg = apply_preset("grip-default").replace(tiling_m=1, tiling_f=0)
    cmd = Command(RUN_VERTEX, prog=0, column=0, slice_idx=0, rows=1, elems=16,
                  d_out=32, first_of_program=True)
    cycles, _ = vertex_cycles(cfg, cmd)
    assert cycles == 6


def test_systolic_fill_is_rows_plus_cols():
    cfg = apply_preset("tpu-plus").replace(tiling_m=1, tiling_f=0, weights_on_chip=True,
                                           weight_bw_bytes_per_cycle=1e9)
    cmd = Command(RUN_VERTEX, prog=0, column=0, slice_idx=0, rows=1, elems=16,
                  d_out=32, first_of_program=True)
    cycles, _ = vertex_cycles(cfg, cmd)
    assert cycles == 16 + 32


def test_simulation_deterministic(workload):
    cfg = apply_preset("grip-default")
    _, a = run(workload, cfg)
    _, b = run(workload, cfg)
    assert a.to_dict() == b.to_dict()


def test_serial_total_equals_sum_of_costs(workload):
    g, plan, feats = workload
    cfg = apply_preset("grip-default").replace(
        pipeline_partitions=False, pipeline_update=False, preload_weights=False
    )
    nfs = build_nodeflow(g, [3, 4, 5], plan.sample_sizes, 2, plan.include_self)
    pnfs = partition_for_plan(plan, nfs, cfg)
    stream = build_command_stream(plan, pnfs, cfg)
    report = simulate(stream, cfg, pnfs, plan)
    assert report.total_cycles == sum(report.per_phase.values())
    assert report.total_cycles == sum(u["busy"] for u in report.per_unit.values())


def test_phase_sum_bounds_total_under_pipelining(workload):
    cfg = apply_preset("grip-default")
    _, report = run(workload, cfg)
    assert sum(report.per_phase.values()) >= report.total_cycles
    assert report.total_cycles >= max(u["busy"] for u in report.per_unit.values())


def test_pipelining_toggles_never_increase_latency(workload):
    full = apply_preset("grip-default")
    _, fast = run(workload, full)
    for disabled in (
        {"pipeline_partitions": False},
        {"pipeline_update": False},
        {"preload_weights": False},
        {"pipeline_partitions": False, "pipeline_update": False,
         "preload_weights": False},
    ):
        _, slow = run(workload, full.replace(**disabled))
        assert slow.total_cycles >= fast.total_cycles


def test_channel_monotonicity(workload):
    prev = None
    for ch in (1, 2, 4, 8, 16):
        cfg = apply_preset("grip-default").replace(
            dram_channels=ch, prefetch_lanes=ch, reduce_lanes=ch
        )
        _, rep = run(workload, cfg)
        if prev is not None:
            assert rep.total_cycles <= prev
        prev = rep.total_cycles


def test_weight_bandwidth_monotonicity(workload):
    prev = None
    for bw in (16, 32, 64, 128, 256):
        cfg = apply_preset("grip-default").replace(weight_bw_bytes_per_cycle=float(bw))
        _, rep = run(workload, cfg)
        if prev is not None:
            assert rep.total_cycles <= prev
        prev = rep.total_cycles


def test_crossbar_width_monotonicity(workload):
    prev = None
    for w in (4, 8, 16, 32, 64):
        cfg = apply_preset("grip-default").replace(xbar_port_elems=w)
        _, rep = run(workload, cfg)
        if prev is not None:
            assert rep.total_cycles <= prev
        prev = rep.total_cycles


def test_dram_bytes_conserved_across_pipelining(workload):
    base = apply_preset("grip-default")
    _, a = run(workload, base)
    _, b = run(workload, base.replace(pipeline_partitions=False, pipeline_update=False,
                                      preload_weights=False))
    assert a.dram_bytes == b.dram_bytes


def test_embeddings_invariant_across_configs(workload):
    embs = []
    for preset in PRESETS:
        emb, _ = run(workload, apply_preset(preset))
        embs.append(emb.raw)
    for other in embs[1:]:
        assert np.array_equal(embs[0], other)


def test_isolated_vertex_has_nonzero_latency():
    g = generate_synthetic("uniform-random", 10, 0, seed=1)
    plan = generate_weights(build_model_program("gcn", (16, 12, 8), (2, 2)), seed=1)
    feats = attach_features(g, 16, seed=1)
    _, rep = run_timed_inference(plan, g, [4], apply_preset("grip-default"), 0, feats)
    assert rep.total_cycles > 0


def test_report_json_keys(workload):
    _, rep = run(workload, apply_preset("grip-default"))
    payload = json.loads(rep.to_json())
    assert set(payload) == {
        "total_cycles", "latency_us", "per_unit", "per_phase",
        "dram_bytes", "weight_bytes",
    }
    assert set(payload["per_phase"]) == {
        "load", "edge_accumulate", "vertex_accumulate", "update",
    }
    assert set(payload["per_unit"]) == {"dram", "edge", "vertex", "update"}


def test_preset_grip_default_parameters():
    cfg = apply_preset("grip-default")
    assert cfg.dram_channels == 4
    assert cfg.prefetch_lanes == cfg.dram_channels
    assert cfg.dram_channels * cfg.dram_bw_bytes_per_cycle == pytest.approx(76.8)
    assert cfg.weight_buffer_kib == 2048
    assert cfg.nodeflow_banks == 4 and cfg.nodeflow_kib == 20
    assert cfg.tile_banks == 2 and cfg.tile_kib == 64
    assert cfg.vu_rows == 16 and cfg.vu_cols == 32
    assert cfg.tiling_f == 64 and cfg.tiling_m == 12
    # The default accumulator tile is the 1.5 KiB f x m footprint.
    assert cfg.tiling_f * cfg.tiling_m * 2 == 1536


def test_preset_tpu_plus():
    cfg = apply_preset("tpu-plus")
    assert not cfg.weights_on_chip
    assert cfg.weight_bw_bytes_per_cycle == 30.0
    assert cfg.vu_systolic
    assert cfg.prefetch_lanes == 1 and cfg.reduce_lanes == 1


def test_preset_hygcn():
    cfg = apply_preset("hygcn-like")
    assert cfg.prefetch_lanes == 1 and cfg.reduce_lanes == 1
    assert cfg.xbar_port_elems == 256
    assert cfg.tiling_m == 1 and cfg.tiling_f == 0


def test_preset_baseline():
    cfg = apply_preset("baseline-emulation")
    assert cfg.merged_sram and cfg.sram_bw_per_lane_bytes == 16.0
    assert cfg.vu_count == 14 and cfg.vu_rows == 8 and cfg.vu_cols == 2
    assert cfg.prefetch_lanes == 14 and cfg.xbar_port_elems == 16
    assert not cfg.pipeline_partitions and not cfg.pipeline_update


def test_breakdown_chain_ends_at_default():
    names = [n for n, _ in breakdown_configs()]
    assert names == ["baseline-emulation", "split-sram", "edge-unit",
                     "vertex-unit", "update-pipelining"]
    final = breakdown_configs()[-1][1]
    assert final == apply_preset("grip-default")


def test_unknown_preset_rejected():
    with pytest.raises(SpecError):
        apply_preset("gpu")


def test_config_file_roundtrip(tmp_path):
    cfg = apply_preset("tpu-plus").replace(dram_channels=8, prefetch_lanes=8)
    path = tmp_path / "arch.cfg"
    path.write_text(serialize_config(cfg))
    loaded = load_config(path)
    assert loaded == cfg


def test_config_unknown_key_rejected():
    with pytest.raises(SpecError):
        parse_config("bogus_knob = 4\n")


def test_config_bad_value_rejected():
    with pytest.raises(SpecError):
        parse_config("dram_channels = many\n")
    with pytest.raises(SpecError):
        apply_overrides(apply_preset("grip-default"), {"merged_sram": "perhaps"})
