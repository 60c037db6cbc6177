import numpy as np
import pytest

from gripsim.errors import ShapeError
from gripsim.fxp import FEATURE_FMT, WEIGHT_FMT, FixedVec, I16_MAX, I16_MIN, dequantize, quantize
from gripsim.greta import (
    ReduceState,
    activate_apply,
    gather_apply,
    reduce_apply,
    reduce_finalize,
    transform_apply,
)


def fv(values, fmt=FEATURE_FMT):
    return FixedVec.from_real(np.asarray(values, dtype=np.float64), fmt)


def test_gather_identity_src():
    out = gather_apply("identity-src", fv([1, 2]), fv([9, 9]))
    assert out.to_real().tolist() == [1.0, 2.0]


def test_gather_identity_dst():
    out = gather_apply("identity-dst", fv([1, 2]), fv([3, 4]))
    assert out.to_real().tolist() == [3.0, 4.0]


def test_gather_product_with_ones_is_identity():
    x = fv([0.5, -0.25, 1.5])
    out = gather_apply("elementwise-product", x, fv([1, 1, 1]))
    assert np.array_equal(out.raw, x.raw)


def test_gather_sum_saturates_at_format_max():
    top = FixedVec(np.array([I16_MAX], dtype=np.int16))
    out = gather_apply("elementwise-sum", top, top)
    assert out.raw[0] == I16_MAX
    bottom = FixedVec(np.array([I16_MIN], dtype=np.int16))
    out = gather_apply("elementwise-sum", bottom, bottom)
    assert out.raw[0] == I16_MIN


def test_gather_scale_by_constant():
    out = gather_apply("scale-by-constant", fv([2.0, -4.0]), fv([0, 0]), const=0.5)
    assert out.to_real().tolist() == [1.0, -2.0]


def test_gather_length_mismatch():
    with pytest.raises(ShapeError):
        gather_apply("elementwise-sum", fv([1, 2]), fv([1]))


def test_reduce_max_fold():
    st = ReduceState.init("max", 1, 2)
    reduce_apply(st, fv([1, 5]).raw, 0)
    reduce_apply(st, fv([3, 2]).raw, 0)
    out = reduce_finalize(st)
    assert dequantize(out).tolist() == [[3.0, 5.0]]


def test_reduce_mean_single_message_is_identity():
    st = ReduceState.init("mean", 1, 3)
    msg = fv([0.75, -0.125, 2.0]).raw
    reduce_apply(st, msg, 0)
    assert np.array_equal(reduce_finalize(st)[0], msg)


def test_reduce_sum_matches_float_oracle_within_ulp():
    rng = np.random.default_rng(8)
    vecs = rng.uniform(-0.25, 0.25, size=(30, 16))
    st = ReduceState.init("sum", 1, 16)
    for v in vecs:
        reduce_apply(st, quantize(v), 0)
    got = dequantize(reduce_finalize(st)[0])
    want = dequantize(quantize(vecs, FEATURE_FMT)).sum(axis=0)
    assert np.abs(got - want).max() <= 1.0 / FEATURE_FMT.scale


def test_reduce_order_independent():
    rng = np.random.default_rng(9)
    msgs = quantize(rng.uniform(-1, 1, size=(40, 8)))
    idx = rng.integers(0, 4, size=40)
    for kind in ("sum", "max", "mean"):
        st1 = ReduceState.init(kind, 4, 8)
        reduce_apply(st1, msgs, idx)
        perm = rng.permutation(40)
        st2 = ReduceState.init(kind, 4, 8)
        reduce_apply(st2, msgs[perm], idx[perm])
        assert np.array_equal(reduce_finalize(st1), reduce_finalize(st2))


def test_reduce_empty_keeps_init():
    st = ReduceState.init("sum", 2, 4)
    out = reduce_finalize(st)
    assert np.array_equal(out, np.zeros((2, 4), dtype=np.int16))
    st = ReduceState.init("max", 2, 4)
    assert (reduce_finalize(st) == I16_MIN).all()


def test_transform_identity_weight():
    w = FixedVec(quantize(np.eye(4), WEIGHT_FMT), WEIGHT_FMT)
    e = fv([0.5, -0.25, 1.0, 0.125])
    out = transform_apply(w, fv([0, 0, 0, 0]), e)
    assert np.array_equal(out.raw, e.raw)


def test_transform_zero_weight_keeps_accumulator():
    w = FixedVec(quantize(np.zeros((3, 4)), WEIGHT_FMT), WEIGHT_FMT)
    a = fv([0.5, 0.25, -1.0])
    out = transform_apply(w, a, fv([1, 1, 1, 1]))
    assert np.array_equal(out.raw, a.raw)


def test_transform_random_matches_float_oracle():
    # Tolerance frozen from measurement (worst observed 1.3e-4, bound 2^-9).
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(10):
        w = quantize(rng.uniform(-0.125, 0.125, (64, 64)), WEIGHT_FMT)
        e = quantize(rng.uniform(-1, 1, 64))
        got = transform_apply(FixedVec(w, WEIGHT_FMT), fv(np.zeros(64)), FixedVec(e)).to_real()
        want = dequantize(w, WEIGHT_FMT) @ dequantize(e)
        worst = max(worst, np.abs(got - want).max())
    assert worst <= 2.0**-9


def test_transform_shape_mismatch():
    w = FixedVec(quantize(np.zeros((3, 4)), WEIGHT_FMT), WEIGHT_FMT)
    with pytest.raises(ShapeError):
        transform_apply(w, fv([0, 0, 0]), fv([1, 1]))


def test_activate_relu():
    out = activate_apply("relu", fv([-1.0, 2.0]))
    assert out.to_real().tolist() == [0.0, 2.0]


def test_udfs_are_pure():
    x, y = fv([0.5, -0.5]), fv([0.25, 0.75])
    first = gather_apply("elementwise-sum", x, y).raw.copy()
    for _ in range(5):
        assert np.array_equal(gather_apply("elementwise-sum", x, y).raw, first)


def test_accumulator_range_check():
    from gripsim.fxp import check_acc_range

    # The desk-scale transform accumulation stays inside the modeled
    # 32-bit envelope; values beyond it raise.
    rng = np.random.default_rng(1)
    w = quantize(rng.uniform(-0.125, 0.125, (64, 602)), WEIGHT_FMT).astype(np.int64)
    e = quantize(rng.uniform(-1, 1, 602)).astype(np.int64)
    check_acc_range(w @ e)
    import pytest as _pytest

    with _pytest.raises(OverflowError):
        check_acc_range(np.array([1 << 40]))
