from pathlib import Path

import numpy as np
import pytest

from gripsim.errors import ShapeError, SpecError
from gripsim.executor import (
    compare_outputs,
    exec_model,
    exec_program,
    load_embeddings,
    save_embeddings,
)
from gripsim.fxp import FEATURE_FMT, WEIGHT_FMT, FixedVec, quantize
from gripsim.graph import FeatureStore, attach_features, generate_synthetic
from gripsim.greta import identity_src
from gripsim.models import (
    NF_LAYER,
    GretaProgram,
    RELU,
    Transform,
    build_model_program,
    generate_weights,
)
from gripsim.nodeflow import build_nodeflow, identity_nodeflow

DATA = Path(__file__).parent / "data"


def identity_program(dim):
    return GretaProgram(
        name="p0",
        layer=0,
        nodeflow=NF_LAYER,
        gather=identity_src("h"),
        reduce="sum",
        transform=Transform("w"),
        activate=RELU,
        route=("feature", "z"),
        d_in=dim,
        d_out=dim,
    )


def identity_weights(dim):
    return {"w": FixedVec(quantize(np.eye(dim), WEIGHT_FMT), WEIGHT_FMT)}


def test_identity_program_end_to_end():
    # Identity nodeflow, sum reduce, W = I, relu on non-negative input.
    nf = identity_nodeflow(np.arange(5))
    h = quantize(np.random.default_rng(0).uniform(0, 1, size=(5, 8)))
    st = exec_program(identity_program(8), nf, {"h": h}, identity_weights(8))
    assert np.array_equal(st.z, h)


def test_empty_edge_set_keeps_initialization():
    nf = identity_nodeflow(np.arange(3))
    nf = type(nf)(nf.u_ids, nf.v_ids, nf.edges[:0], identity=False)
    h = quantize(np.ones((3, 4)))
    st = exec_program(identity_program(4), nf, {"h": h}, identity_weights(4))
    assert np.array_equal(st.z, np.zeros((3, 4), dtype=np.int16))
    assert st.no_edge_outputs.all()


def test_partitioned_execution_bit_identical():
    g = generate_synthetic("uniform-random", 50, 6, seed=1)
    feats = attach_features(g, 12, seed=2)
    plan = generate_weights(build_model_program("gcn", (12, 10, 8), (5, 3)), seed=3)
    nfs = build_nodeflow(g, [0, 7, 13], plan.sample_sizes, 4, plan.include_self)
    plain = exec_model(plan, nfs, feats)
    parted = exec_model(plan, nfs, feats, chunk=(8, 8))
    assert np.array_equal(plain.raw, parted.raw)


def test_tiled_execution_bit_identical():
    g = generate_synthetic("uniform-random", 40, 5, seed=5)
    feats = attach_features(g, 16, seed=6)
    plan = generate_weights(build_model_program("gin", (16, 12, 8), (4, 4)), seed=7)
    nfs = build_nodeflow(g, [1, 2], plan.sample_sizes, 8, plan.include_self)
    plain = exec_model(plan, nfs, feats)
    tiled = exec_model(plan, nfs, feats, tiling=(5, 3), chunk=(7, 3))
    assert np.array_equal(plain.raw, tiled.raw)


def test_gcn_chain_matches_hand_computed_golden(chain_graph):
    # Per-vertex constant features 0.75 / 0.375 / 0.1875 with identity-padded
    # weights; every step is exact except one round-to-even division
    # (5248 / 3 -> 1749). Expected codes recorded in the golden file.
    plan = build_model_program("gcn", (4, 3, 2), (25, 10))
    w1 = np.zeros((3, 4))
    w1[:, :3] = np.eye(3)
    w2 = np.zeros((2, 3))
    w2[:, :2] = np.eye(2)
    plan.weights = {
        "l0.w": FixedVec(quantize(w1, WEIGHT_FMT), WEIGHT_FMT),
        "l1.w": FixedVec(quantize(w2, WEIGHT_FMT), WEIGHT_FMT),
    }
    feats = FeatureStore(
        np.repeat([[0.75], [0.375], [0.1875]], 4, axis=1), 4, None
    )
    nfs = build_nodeflow(chain_graph, [0, 1, 2], plan.sample_sizes, 0, True)
    emb = exec_model(plan, nfs, feats)
    golden, fmt = load_embeddings(DATA / "gcn_chain_golden.emb")
    assert fmt == FEATURE_FMT
    assert np.array_equal(emb.raw, golden)


def test_exec_model_layer_count_mismatch():
    g = generate_synthetic("uniform-random", 10, 2, seed=0)
    feats = attach_features(g, 8, seed=0)
    plan = generate_weights(build_model_program("gcn", (8, 6, 4), (2, 2)), seed=0)
    nfs = build_nodeflow(g, [0], (2,), 0)
    with pytest.raises(SpecError):
        exec_model(plan, nfs, feats)


def test_compare_outputs_identical():
    x = np.ones((3, 4))
    rep = compare_outputs(x, x, tol=0.0)
    assert rep.max_abs == 0.0 and rep.passed


def test_compare_outputs_constructed_offset():
    x = np.zeros((2, 2))
    rep = compare_outputs(x, x + 2.0**-12, tol=2.0**-13)
    assert rep.max_abs == pytest.approx(2.0**-12)
    assert not rep.passed
    assert rep.max_abs >= rep.mean_abs >= 0.0


def test_compare_outputs_shape_mismatch():
    with pytest.raises(ShapeError):
        compare_outputs(np.zeros((2, 2)), np.zeros((2, 3)), tol=0.1)


def test_embeddings_file_roundtrip(tmp_path):
    emb = FixedVec(quantize(np.random.default_rng(0).uniform(-1, 1, (4, 6))))
    path = tmp_path / "e.emb"
    save_embeddings(emb, path)
    assert path.read_bytes()[:8] == b"GRIPEMB1"
    raw, fmt = load_embeddings(path)
    assert np.array_equal(raw, emb.raw)
    assert fmt == FEATURE_FMT


def test_exec_rejects_vertex_acc_route_without_transform():
    nf = identity_nodeflow(np.arange(2))
    prog = GretaProgram(
        name="p",
        layer=0,
        nodeflow=NF_LAYER,
        gather=identity_src("h"),
        reduce="sum",
        transform=None,
        activate=RELU,
        route=("feature", "z"),
        d_in=4,
        d_out=4,
    )
    h = quantize(np.ones((2, 4)))
    with pytest.raises(SpecError):
        exec_program(prog, nf, {"h": h}, {}, routed_va=np.zeros((2, 4), dtype=np.int16))


def test_edge_accumulator_routing():
    # Output of one program seeding another's edge accumulator: the fold
    # continues from the routed values instead of zeros.
    nf = identity_nodeflow(np.arange(3))
    h = quantize(np.full((3, 4), 0.25))
    routed = quantize(np.full((3, 4), 0.5))
    st = exec_program(identity_program(4), nf, {"h": h}, identity_weights(4),
                      routed_ea=routed)
    want = quantize(np.full((3, 4), 0.75))
    assert np.array_equal(st.z, want)


def test_edge_accumulator_routing_rejected_for_mean():
    nf = identity_nodeflow(np.arange(2))
    prog = identity_program(4)
    prog.reduce = "mean"
    h = quantize(np.ones((2, 4)))
    with pytest.raises(SpecError):
        exec_program(prog, nf, {"h": h}, identity_weights(4),
                     routed_ea=quantize(np.ones((2, 4))))
