"""gripsim: functional and timing simulator for a GNN inference accelerator.

The library is organized along the pipeline:

  graph     loading, synthetic generation, features, statistics
  nodeflow  deterministic sampling, layer nodeflows, edge-block partitioning
  fxp/greta/lut/models
            fixed-point numerics, the four UDF families, the two-level LUT,
            and the model zoo (gcn, graphsage-max, gin, ggcn)
  executor/oracle
            bit-exact fixed-point execution and the float64 reference
  arch/schedule/timing
            architecture presets, static command scheduling, and the
            cycle-approximate performance model
  experiments/cli
            sweeps, latency distributions, preset comparisons, plotting
"""

from .arch import ArchConfig, apply_preset
from .executor import compare_outputs, exec_model, exec_program
from .fxp import FEATURE_FMT, WEIGHT_FMT, FixedVec, FxFormat, dequantize, quantize
from .graph import (
    FeatureStore,
    Graph,
    attach_features,
    generate_synthetic,
    graph_stats,
    load_graph,
)
from .models import ModelPlan, build_model_program, generate_weights
from .nodeflow import (
    LayerNodeflow,
    PartitionedNodeflow,
    build_nodeflow,
    khop_oracle,
    partition_nodeflow,
    sample_neighbors,
)
from .oracle import float_oracle
from .schedule import build_command_stream, partition_for_plan
from .timing import TimingReport, run_timed_inference, simulate

__version__ = "0.1.0"

__all__ = [
    "ArchConfig",
    "FEATURE_FMT",
    "FeatureStore",
    "FixedVec",
    "FxFormat",
    "Graph",
    "LayerNodeflow",
    "ModelPlan",
    "PartitionedNodeflow",
    "TimingReport",
    "WEIGHT_FMT",
    "apply_preset",
    "attach_features",
    "build_command_stream",
    "build_model_program",
    "build_nodeflow",
    "compare_outputs",
    "dequantize",
    "exec_model",
    "exec_program",
    "float_oracle",
    "generate_synthetic",
    "generate_weights",
    "graph_stats",
    "khop_oracle",
    "load_graph",
    "partition_for_plan",
    "partition_nodeflow",
    "quantize",
    "run_timed_inference",
    "sample_neighbors",
    "simulate",
]
