import json

import pytest

from gripsim.cli import main


@pytest.fixture
def graph_file(tmp_path):
    path = tmp_path / "g.csr"
    assert main(["gen", "--synthetic", "500:8:uniform-random", "--seed", "3",
                 "--out", str(path)]) == 0
    return path


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_ingest_roundtrip(tmp_path):
    edges = tmp_path / "e.txt"
    edges.write_text("# demo\n0 1\n1 2\n")
    out = tmp_path / "g.csr"
    assert run_cli("ingest", "--input", edges, "--out", out) == 0
    assert out.read_bytes()[:8] == b"GRIPCSR1"


def test_ingest_missing_file_exit_3(tmp_path):
    assert run_cli("ingest", "--input", tmp_path / "nope.txt",
                   "--out", tmp_path / "g.csr") == 3


def test_ingest_malformed_exit_3(tmp_path):
    edges = tmp_path / "e.txt"
    edges.write_text("0 1\nbroken\n")
    assert run_cli("ingest", "--input", edges, "--out", tmp_path / "g.csr") == 3


def test_gen_bad_spec_exit_2(tmp_path):
    assert run_cli("gen", "--synthetic", "10:20:uniform-random",
                   "--out", tmp_path / "g.csr") == 2
    assert run_cli("gen", "--synthetic", "oops",
                   "--out", tmp_path / "g.csr") == 2


def test_features_and_nodeflow(tmp_path, graph_file):
    fea = tmp_path / "f.fea"
    assert run_cli("features", "--graph", graph_file, "--dim", "16",
                   "--seed", "1", "--out", fea) == 0
    assert fea.read_bytes()[:8] == b"GRIPFEA1"
    nf = tmp_path / "n.nf"
    assert run_cli("nodeflow", "--graph", graph_file, "--targets", "1,2",
                   "--fanouts", "4,2", "--seed", "1", "--out", nf) == 0
    assert nf.read_bytes()[:8] == b"GRIPNF01"


def test_run_writes_artifacts_and_is_deterministic(tmp_path, graph_file):
    args = ["run", "--graph", graph_file, "--model", "gcn",
            "--dims", "32,24,16", "--fanouts", "4,2", "--targets", "7",
            "--seed", "5", "--no-plot"]
    assert run_cli(*args, "--out", tmp_path / "r1") == 0
    assert run_cli(*args, "--out", tmp_path / "r2") == 0
    emb1 = (tmp_path / "r1" / "embeddings.emb").read_bytes()
    emb2 = (tmp_path / "r2" / "embeddings.emb").read_bytes()
    assert emb1 == emb2
    rep1 = (tmp_path / "r1" / "report.json").read_bytes()
    rep2 = (tmp_path / "r2" / "report.json").read_bytes()
    assert rep1 == rep2
    payload = json.loads(rep1)
    assert payload["dims"] == [32, 24, 16]
    assert payload["model"] == "gcn"
    assert payload["report"]["total_cycles"] > 0


def test_run_does_not_mutate_inputs(tmp_path, graph_file):
    before = graph_file.read_bytes()
    assert run_cli("run", "--graph", graph_file, "--model", "gin",
                   "--dims", "16,12,8", "--fanouts", "3,2", "--targets", "1",
                   "--out", tmp_path / "r", "--no-plot") == 0
    assert graph_file.read_bytes() == before


def test_latency_dist_csv_schema(tmp_path, graph_file):
    out = tmp_path / "ld"
    assert run_cli("latency-dist", "--graph", graph_file, "--model", "gcn",
                   "--dims", "16,12,8", "--fanouts", "3,2", "--samples", "12",
                   "--seed", "2", "--out", out, "--no-plot") == 0
    lines = (out / "latency_dist.csv").read_text().splitlines()
    assert lines[0] == "vertex_id,neighborhood_size,total_cycles,latency_us"
    assert len(lines) == 13
    summary = (out / "latency_summary.csv").read_text().splitlines()
    assert summary[0] == "metric,value"


def test_sweep_csv_schema_and_plot(tmp_path, graph_file):
    out = tmp_path / "sw"
    assert run_cli("sweep", "--graph", graph_file, "--model", "gcn",
                   "--dims", "16,12,8", "--fanouts", "3,2", "--targets", "3",
                   "--sweep", "dram_channels=1,2,4", "--seed", "2",
                   "--out", out) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == (
        "dram_channels,total_cycles,latency_us,load_cycles,"
        "edge_accumulate_cycles,vertex_accumulate_cycles,update_cycles,"
        "dram_bytes,weight_bytes"
    )
    assert len(lines) == 4
    assert (out / "sweep.png").exists()


def test_sweep_two_axes_grid(tmp_path, graph_file):
    out = tmp_path / "grid"
    assert run_cli("sweep", "--graph", graph_file, "--model", "gcn",
                   "--dims", "32,24,16", "--fanouts", "3,2", "--targets", "3",
                   "--sweep", "tiling_f=16,32", "--sweep", "tiling_m=1,2,4",
                   "--seed", "2", "--out", out, "--no-plot") == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("tiling_f,tiling_m,")
    assert len(lines) == 7


def test_sweep_invalid_axis_exit_2(tmp_path, graph_file):
    assert run_cli("sweep", "--graph", graph_file, "--sweep", "warp_size=1,2",
                   "--out", tmp_path / "x", "--no-plot") == 2


def test_compare_presets_csv(tmp_path, graph_file):
    out = tmp_path / "cp"
    assert run_cli("compare-presets", "--graph", graph_file, "--model", "gcn",
                   "--dims", "32,24,16", "--fanouts", "3,2", "--seed", "2",
                   "--out", out, "--no-plot") == 0
    lines = (out / "compare_presets.csv").read_text().splitlines()
    assert lines[0] == "config,total_cycles,latency_us,speedup_vs_baseline"
    names = [l.split(",")[0] for l in lines[1:]]
    assert names[0] == "baseline-emulation"
    assert "grip-default" in names and "tpu-plus" in names
    # The baseline compares to itself at exactly 1.0.
    assert float(lines[1].split(",")[3]) == 1.0


def test_validate_config(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("dram_channels = 8\nprefetch_lanes = 8\n")
    assert run_cli("validate-config", "--config", cfg) == 0
    bad = tmp_path / "b.cfg"
    bad.write_text("dram_channels = -2\n")
    assert run_cli("validate-config", "--config", bad) == 2
    unknown = tmp_path / "c.cfg"
    unknown.write_text("quantum_bits = 3\n")
    assert run_cli("validate-config", "--config", unknown) == 2


def test_synthetic_spec_via_run(tmp_path):
    assert run_cli("run", "--synthetic", "200:6:power-law", "--model", "ggcn",
                   "--dims", "16,12,8", "--fanouts", "3,2", "--seed", "4",
                   "--out", tmp_path / "r", "--no-plot") == 0


def test_missing_graph_and_synthetic_exit_2(tmp_path):
    assert run_cli("run", "--model", "gcn", "--out", tmp_path / "r",
                   "--no-plot") == 2
