"""Model zoo: compiling GNN layers into sequences of GReTA programs.

Each layer becomes one or more programs. A program's output is routed to a
named feature slot, or into a later program's edge or vertex accumulator.
Programs in a plan execute in list order; routing forms a DAG.

Implemented models (z is the layer output, N(v) the sampled neighborhood):

  gcn            z_v = relu(W @ mean({h_u : u in N(v) u {v}}))
  graphsage-max  p_u = relu(W_pool @ h_u + b_pool)
                 z_v = relu(W_self @ h_v + W_nbr @ max({p_u : u in N(v)}))
  gin            s_v = sum({h_u : u in N(v) u {v}})   (epsilon = 0)
                 z_v = relu(W2 @ relu(W1 @ s_v + b1) + b2)
  ggcn           g_u = sigmoid(W_gate @ h_u + b_gate)   (vector gate, output dim)
                 y_u = W_val @ h_u + b_val
                 z_v = relu(sum({g_u * y_u : u in N(v) u {v}}))

The ggcn gate is per-source-vertex because activate (the only sigmoid
site) runs per vertex, not per edge; the gated self term plays the role of
the residual path. graphsage-max keeps self out of the neighbor sample
since the self contribution flows through W_self.

Weight file (little-endian): magic "GRIPWGT1", u32 matrix count, then per
matrix u32 rows, u32 cols, u8 fractional bits, payload i16 row-major.
Matrices appear in plan weight order; biases are stored as 1 x n matrices.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DataError, SpecError
from .fxp import FEATURE_FMT, WEIGHT_FMT, FixedVec, FxFormat, quantize
from .greta import (
    ACTIVATE_KINDS,
    Gather,
    Operand,
    REDUCE_KINDS,
    elementwise_product,
    identity_src,
)
from .lut import sigmoid_lut

WGT_MAGIC = b"GRIPWGT1"

MODEL_IDS = ("gcn", "graphsage-max", "gin", "ggcn")

# Paper-style default dimension schedule: input 602, hidden 512, output 256.
DEFAULT_DIMS = (602, 512, 256)
DEFAULT_SAMPLE_SIZES = (25, 10)

NF_LAYER = "layer"
NF_IDENTITY_IN = "identity-input"  # iterate the layer's input vertex set U
NF_IDENTITY_OUT = "identity-output"  # iterate the layer's output vertex set V


@dataclass(frozen=True)
class Transform:
    weight: str
    bias: str | None = None


@dataclass(frozen=True)
class Activate:
    kind: str = "identity"
    lut: str | None = None

    def __post_init__(self):
        if self.kind not in ACTIVATE_KINDS:
            raise SpecError(f"unknown activate kind {self.kind!r}")
        if self.kind == "lut" and self.lut is None:
            raise SpecError("lut activation needs a lut name")


RELU = Activate("relu")
IDENT = Activate("identity")


@dataclass
class GretaProgram:
    """One (gather, reduce, transform, activate) phase bundle."""

    name: str
    layer: int
    nodeflow: str  # NF_LAYER | NF_IDENTITY_IN | NF_IDENTITY_OUT
    gather: Gather
    reduce: str
    transform: Transform | None
    activate: Activate
    route: tuple  # ('feature', slot) | ('vertex-acc', prog) | ('edge-acc', prog)
    d_in: int
    d_out: int

    def __post_init__(self):
        if self.reduce not in REDUCE_KINDS:
            raise SpecError(f"unknown reduce kind {self.reduce!r}")
        if self.nodeflow not in (NF_LAYER, NF_IDENTITY_IN, NF_IDENTITY_OUT):
            raise SpecError(f"unknown nodeflow selector {self.nodeflow!r}")

    @property
    def reads_source_features(self) -> bool:
        return any(op.endpoint == "src" for op in self.gather.operands)

    @property
    def reads_dest_features(self) -> bool:
        return any(op.endpoint == "dst" for op in self.gather.operands)

    @property
    def needs_r0(self) -> bool:
        # The reduce-side R0 stage fetches the second feature stream; it is
        # exposed per program because single-operand gathers do not need it.
        return len(self.gather.operands) > 1

    @property
    def input_slots(self) -> tuple:
        return tuple(op.slot for op in self.gather.operands)


@dataclass
class ModelPlan:
    """Ordered per-layer program DAG plus the dimension schedule."""

    model: str
    layer_dims: list  # [(d_in, d_out)] per layer
    sample_sizes: tuple
    programs: list = field(default_factory=list)
    weights: dict = field(default_factory=dict)  # name -> FixedVec
    luts: dict = field(default_factory=dict)  # name -> Lut
    include_self: bool = True
    weight_order: list = field(default_factory=list)

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims)

    def layer_programs(self, layer: int) -> list:
        return [p for p in self.programs if p.layer == layer]

    def validate(self) -> "ModelPlan":
        """Check routing is a forward DAG and no slot is ever overwritten.

        A program may not write a slot that already exists in its layer
        (so nothing a later program rereads can be clobbered mid-plan),
        and accumulator routes must target a later program of the layer.
        """
        for layer in range(self.num_layers):
            progs = self.layer_programs(layer)
            order = {p.name: i for i, p in enumerate(progs)}
            slots = {"h"}
            for i, p in enumerate(progs):
                for slot in p.input_slots:
                    if slot not in slots:
                        raise SpecError(
                            f"{p.name} reads slot {slot!r} before it is written"
                        )
                kind, target = p.route
                if kind == "feature":
                    if target in slots:
                        raise SpecError(
                            f"{p.name} would overwrite live slot {target!r}"
                        )
                    slots.add(target)
                elif kind in ("vertex-acc", "edge-acc"):
                    if target not in order or order[target] <= i:
                        raise SpecError(
                            f"{p.name} routes {kind} to {target!r}, which is not a "
                            "later program of the same layer"
                        )
                else:
                    raise SpecError(f"unknown route kind {kind!r}")
            if progs and progs[-1].route != ("feature", "z"):
                raise SpecError(f"layer {layer} must end by writing slot 'z'")
        for p in self.programs:
            if p.transform is not None:
                w = self.weights.get(p.transform.weight)
                if w is not None and w.raw.shape != (p.d_out, p.d_in):
                    raise SpecError(
                        f"{p.name}: weight {p.transform.weight} has shape "
                        f"{w.raw.shape}, expected ({p.d_out}, {p.d_in})"
                    )
        return self


def layer_dim_schedule(dims, num_layers: int) -> list:
    """(in, hidden, out) -> per-layer (d_in, d_out) pairs."""
    d_in, hidden, d_out = dims
    if min(dims) < 1:
        raise SpecError("dims must be positive")
    if num_layers == 1:
        return [(d_in, d_out)]
    pairs = [(d_in, hidden)]
    pairs += [(hidden, hidden)] * (num_layers - 2)
    pairs.append((hidden, d_out))
    return pairs


def build_model_program(model: str, dims=DEFAULT_DIMS, sample_sizes=DEFAULT_SAMPLE_SIZES) -> ModelPlan:
    """Compile a model id into a validated ModelPlan (weights not yet attached)."""
    if model not in MODEL_IDS:
        raise SpecError(f"unknown model {model!r}; expected one of {MODEL_IDS}")
    layers = layer_dim_schedule(dims, len(sample_sizes))
    plan = ModelPlan(model, layers, tuple(sample_sizes))
    builder = {
        "gcn": _build_gcn_layer,
        "graphsage-max": _build_sage_layer,
        "gin": _build_gin_layer,
        "ggcn": _build_ggcn_layer,
    }[model]
    plan.include_self = model != "graphsage-max"
    for layer, (d_in, d_out) in enumerate(layers):
        builder(plan, layer, d_in, d_out)
    if model == "ggcn":
        plan.luts["sigmoid"] = sigmoid_lut()
    return plan.validate()


def _add_weight_name(plan, name):
    plan.weight_order.append(name)
    return name


def _build_gcn_layer(plan, layer, d_in, d_out):
    w = _add_weight_name(plan, f"l{layer}.w")
    plan.programs.append(
        GretaProgram(
            name=f"l{layer}.conv",
            layer=layer,
            nodeflow=NF_LAYER,
            gather=identity_src("h"),
            reduce="mean",
            transform=Transform(w),
            activate=RELU,
            route=("feature", "z"),
            d_in=d_in,
            d_out=d_out,
        )
    )


def _build_sage_layer(plan, layer, d_in, d_out):
    w_pool = _add_weight_name(plan, f"l{layer}.w_pool")
    b_pool = _add_weight_name(plan, f"l{layer}.b_pool")
    w_nbr = _add_weight_name(plan, f"l{layer}.w_nbr")
    w_self = _add_weight_name(plan, f"l{layer}.w_self")
    update = f"l{layer}.update"
    plan.programs += [
        GretaProgram(
            name=f"l{layer}.pool",
            layer=layer,
            nodeflow=NF_IDENTITY_IN,
            gather=identity_src("h"),
            reduce="sum",
            transform=Transform(w_pool, b_pool),
            activate=RELU,
            route=("feature", "pooled"),
            d_in=d_in,
            d_out=d_out,
        ),
        GretaProgram(
            name=f"l{layer}.agg",
            layer=layer,
            nodeflow=NF_LAYER,
            gather=identity_src("pooled"),
            reduce="max",
            transform=Transform(w_nbr),
            activate=IDENT,
            route=("vertex-acc", update),
            d_in=d_out,
            d_out=d_out,
        ),
        GretaProgram(
            name=update,
            layer=layer,
            nodeflow=NF_IDENTITY_OUT,
            gather=identity_src("h"),
            reduce="sum",
            transform=Transform(w_self),
            activate=RELU,
            route=("feature", "z"),
            d_in=d_in,
            d_out=d_out,
        ),
    ]


def _build_gin_layer(plan, layer, d_in, d_out):
    w1 = _add_weight_name(plan, f"l{layer}.w1")
    b1 = _add_weight_name(plan, f"l{layer}.b1")
    w2 = _add_weight_name(plan, f"l{layer}.w2")
    b2 = _add_weight_name(plan, f"l{layer}.b2")
    plan.programs += [
        GretaProgram(
            name=f"l{layer}.agg",
            layer=layer,
            nodeflow=NF_LAYER,
            gather=identity_src("h"),
            reduce="sum",
            transform=None,
            activate=IDENT,
            route=("feature", "agg"),
            d_in=d_in,
            d_out=d_in,
        ),
        GretaProgram(
            name=f"l{layer}.mlp1",
            layer=layer,
            nodeflow=NF_IDENTITY_OUT,
            gather=identity_src("agg"),
            reduce="sum",
            transform=Transform(w1, b1),
            activate=RELU,
            route=("feature", "hid"),
            d_in=d_in,
            d_out=d_out,
        ),
        GretaProgram(
            name=f"l{layer}.mlp2",
            layer=layer,
            nodeflow=NF_IDENTITY_OUT,
            gather=identity_src("hid"),
            reduce="sum",
            transform=Transform(w2, b2),
            activate=RELU,
            route=("feature", "z"),
            d_in=d_out,
            d_out=d_out,
        ),
    ]


def _build_ggcn_layer(plan, layer, d_in, d_out):
    w_gate = _add_weight_name(plan, f"l{layer}.w_gate")
    b_gate = _add_weight_name(plan, f"l{layer}.b_gate")
    w_val = _add_weight_name(plan, f"l{layer}.w_val")
    b_val = _add_weight_name(plan, f"l{layer}.b_val")
    plan.programs += [
        GretaProgram(
            name=f"l{layer}.gate",
            layer=layer,
            nodeflow=NF_IDENTITY_IN,
            gather=identity_src("h"),
            reduce="sum",
            transform=Transform(w_gate, b_gate),
            activate=Activate("lut", "sigmoid"),
            route=("feature", "gate"),
            d_in=d_in,
            d_out=d_out,
        ),
        GretaProgram(
            name=f"l{layer}.update",
            layer=layer,
            nodeflow=NF_IDENTITY_IN,
            gather=identity_src("h"),
            reduce="sum",
            transform=Transform(w_val, b_val),
            activate=IDENT,
            route=("feature", "val"),
            d_in=d_in,
            d_out=d_out,
        ),
        GretaProgram(
            name=f"l{layer}.edge",
            layer=layer,
            nodeflow=NF_LAYER,
            gather=elementwise_product(Operand("src", "gate"), Operand("src", "val")),
            reduce="sum",
            transform=None,
            activate=RELU,
            route=("feature", "z"),
            d_in=d_out,
            d_out=d_out,
        ),
    ]


def generate_weights(plan: ModelPlan, seed: int) -> ModelPlan:
    """Attach seeded random weights: uniform [-s, s) with s = 1/sqrt(fan_in).

    The scale keeps layer outputs inside the Q4.12 feature range for inputs
    drawn in [-1, 1), mirroring the magnitude regime of trained weights.
    Biases use the feature format; matrices the weight format.
    """
    for idx, name in enumerate(plan.weight_order):
        prog = _owning_program(plan, name)
        gen = rng.stream(seed, rng.TAG_WEIGHTS, idx)
        if name == prog.transform.weight:
            scale = 1.0 / np.sqrt(prog.d_in)
            values = gen.uniform(-scale, scale, size=(prog.d_out, prog.d_in))
            plan.weights[name] = FixedVec(quantize(values, WEIGHT_FMT), WEIGHT_FMT)
        else:
            scale = 1.0 / np.sqrt(prog.d_in)
            values = gen.uniform(-scale, scale, size=prog.d_out)
            plan.weights[name] = FixedVec(quantize(values, FEATURE_FMT), FEATURE_FMT)
    return plan.validate()


def _owning_program(plan, weight_name):
    for p in plan.programs:
        if p.transform and weight_name in (p.transform.weight, p.transform.bias):
            return p
    raise SpecError(f"weight {weight_name!r} is not referenced by any program")


def save_weights(plan: ModelPlan, path):
    with open(path, "wb") as fh:
        fh.write(WGT_MAGIC)
        fh.write(struct.pack("<I", len(plan.weight_order)))
        for name in plan.weight_order:
            mat = plan.weights[name]
            raw = mat.raw if mat.raw.ndim == 2 else mat.raw[None, :]
            rows, cols = raw.shape
            fh.write(struct.pack("<IIB", rows, cols, mat.fmt.frac_bits))
            fh.write(raw.astype("<i2").tobytes())


def load_weights(plan: ModelPlan, path) -> ModelPlan:
    """Load matrices in plan weight order from a GRIPWGT1 file."""
    with open(path, "rb") as fh:
        if fh.read(8) != WGT_MAGIC:
            raise DataError("not a weight file")
        (count,) = struct.unpack("<I", fh.read(4))
        if count != len(plan.weight_order):
            raise DataError(
                f"weight file has {count} matrices, plan needs {len(plan.weight_order)}"
            )
        for name in plan.weight_order:
            rows, cols, frac = struct.unpack("<IIB", fh.read(9))
            data = np.frombuffer(fh.read(2 * rows * cols), dtype="<i2")
            if data.size != rows * cols:
                raise DataError("truncated weight file")
            raw = data.reshape(rows, cols).copy()
            if rows == 1:
                raw = raw[0]
            plan.weights[name] = FixedVec(raw, FxFormat(16 - frac, frac))
    return plan.validate()


def dequantized_weights(plan: ModelPlan) -> dict:
    """Float64 copies of the quantized weights, for the reference executor."""
    return {name: w.to_real() for name, w in plan.weights.items()}
