"""Float64 reference implementations of the supported models.

These follow each model's mathematical definition directly over the layer
nodeflows (dense numpy, true sigmoid, no fixed point and no program
machinery), so they serve as an independent oracle for the fixed-point
executor. The only shared convention is the empty-neighborhood fill for
max aggregation, which is a property of the model definition here, not of
any number format.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, SpecError
from .fxp import FEATURE_FMT, I16_MIN
from .lut import sigmoid
from .nodeflow import LayerNodeflow

# Max over an empty sampled neighborhood yields this fill value.
EMPTY_MAX_FILL = I16_MIN / FEATURE_FMT.scale  # -8.0


def _check_dims(h: np.ndarray, nf: LayerNodeflow):
    if h.shape[0] != nf.num_inputs:
        raise ShapeError(f"features have {h.shape[0]} rows, nodeflow reads {nf.num_inputs}")


def _mean_aggregate(nf: LayerNodeflow, h: np.ndarray) -> np.ndarray:
    agg = np.zeros((nf.num_outputs, h.shape[1]))
    counts = np.zeros(nf.num_outputs)
    np.add.at(agg, nf.edges[:, 1], h[nf.edges[:, 0]])
    np.add.at(counts, nf.edges[:, 1], 1.0)
    return agg / np.maximum(counts, 1.0)[:, None]


def _sum_aggregate(nf: LayerNodeflow, h: np.ndarray) -> np.ndarray:
    agg = np.zeros((nf.num_outputs, h.shape[1]))
    np.add.at(agg, nf.edges[:, 1], h[nf.edges[:, 0]])
    return agg


def _max_aggregate(nf: LayerNodeflow, rows: np.ndarray) -> np.ndarray:
    agg = np.full((nf.num_outputs, rows.shape[1]), EMPTY_MAX_FILL)
    np.maximum.at(agg, nf.edges[:, 1], rows[nf.edges[:, 0]])
    return agg


def gcn_layer(nf, h, w):
    return np.maximum(_mean_aggregate(nf, h) @ w.T, 0.0)


def gcn_layer_spmm(nf, h, w):
    """The same layer as sparse-matrix times dense form: relu(A @ H @ W^T).

    A is the (outputs x inputs) averaging operator derived from the
    nodeflow. Used as a dual-route cross-check of the message-passing form.
    """
    a = np.zeros((nf.num_outputs, nf.num_inputs))
    np.add.at(a, (nf.edges[:, 1], nf.edges[:, 0]), 1.0)
    counts = a.sum(axis=1)
    a /= np.maximum(counts, 1.0)[:, None]
    return np.maximum(a @ h @ w.T, 0.0)


def sage_max_layer(nf, h, w_pool, b_pool, w_nbr, w_self):
    _check_dims(h, nf)
    pooled = np.maximum(h @ w_pool.T + b_pool, 0.0)
    agg = _max_aggregate(nf, pooled)
    h_self = h[: nf.num_outputs]  # outputs occupy the input set's prefix
    return np.maximum(h_self @ w_self.T + agg @ w_nbr.T, 0.0)


def gin_layer(nf, h, w1, b1, w2, b2):
    _check_dims(h, nf)
    s = _sum_aggregate(nf, h)
    hid = np.maximum(s @ w1.T + b1, 0.0)
    return np.maximum(hid @ w2.T + b2, 0.0)


def ggcn_layer(nf, h, w_gate, b_gate, w_val, b_val):
    _check_dims(h, nf)
    gate = sigmoid(h @ w_gate.T + b_gate)
    val = h @ w_val.T + b_val
    return np.maximum(_sum_aggregate(nf, gate * val), 0.0)


def float_oracle(model: str, nfs: list, feats_f64: np.ndarray, weights_f64: dict,
                 spmm: bool = False) -> np.ndarray:
    """Run a model in float64 over the given nodeflows.

    `feats_f64` is the full per-vertex feature table (indexed by global
    id); `weights_f64` maps the plan's weight names to float matrices.
    Returns the target embeddings (rows follow the last layer's outputs).
    """
    if model not in ("gcn", "graphsage-max", "gin", "ggcn"):
        raise SpecError(f"unknown model {model!r}")
    h = np.asarray(feats_f64, dtype=np.float64)[nfs[0].u_ids]
    for layer, nf in enumerate(nfs):
        _check_dims(h, nf)
        w = lambda name: weights_f64[f"l{layer}.{name}"]  # noqa: E731
        if model == "gcn":
            fn = gcn_layer_spmm if spmm else gcn_layer
            h = fn(nf, h, w("w"))
        elif model == "graphsage-max":
            h = sage_max_layer(nf, h, w("w_pool"), w("b_pool"), w("w_nbr"), w("w_self"))
        elif model == "gin":
            h = gin_layer(nf, h, w("w1"), w("b1"), w("w2"), w("b2"))
        elif model == "ggcn":
            h = ggcn_layer(nf, h, w("w_gate"), w("b_gate"), w("w_val"), w("b_val"))
        else:
            raise SpecError(f"unknown model {model!r}")
    return h
