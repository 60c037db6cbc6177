"""Static command-stream construction for the timing model.

The host schedules every memory transfer and execution command up front;
the control unit issues them in order and barriers enforce dependencies.
Commands between consecutive barriers may overlap (different units run
concurrently; commands on one unit serialize), which is how
double-buffering and inter-phase pipelining are expressed: the builder
groups a slice's feature load with the previous slice's edge-accumulate
and the one before that's vertex-accumulate.

With every pipelining toggle off, a barrier follows every command and the
simulated total is exactly the sum of per-command costs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arch import ELEM_BYTES, ArchConfig
from .errors import InvariantError, SchedulingError
from .models import NF_IDENTITY_IN, NF_IDENTITY_OUT, NF_LAYER, ModelPlan
from .nodeflow import LayerNodeflow, identity_nodeflow, partition_nodeflow

BARRIER = "barrier"
LOAD_FEATURES = "load-features"
LOAD_WEIGHTS = "load-weights"
RUN_EDGE = "run-edge-accumulate"
RUN_VERTEX = "run-vertex-accumulate"
RUN_UPDATE = "run-vertex-update"

UNIT_OF = {
    LOAD_FEATURES: "dram",
    LOAD_WEIGHTS: "dram",
    RUN_EDGE: "edge",
    RUN_VERTEX: "vertex",
    RUN_UPDATE: "update",
}

PHASE_OF = {
    LOAD_FEATURES: "load",
    LOAD_WEIGHTS: "load",
    RUN_EDGE: "edge_accumulate",
    RUN_VERTEX: "vertex_accumulate",
    RUN_UPDATE: "update",
}


@dataclass
class Command:
    kind: str
    prog: int = -1  # index into plan.programs
    column: int = -1
    chunk: int = -1
    slice_idx: int = -1
    # Workload metadata consumed by the cost model.
    rows: int = 0  # vertices loaded / live outputs
    elems: int = 0  # elements per row (slice width) or output width
    edges: int = 0
    max_per_input: int = 0  # busiest single source vertex in the block
    max_per_output: int = 0  # busiest single destination vertex in the block
    d_out: int = 0
    bytes: int = 0  # DRAM payload bytes for load commands
    needs_r0: bool = False
    first_of_program: bool = False

    @property
    def unit(self) -> str:
        return UNIT_OF[self.kind]

    @property
    def phase(self) -> str:
        return PHASE_OF[self.kind]


@dataclass
class CommandStream:
    commands: list = field(default_factory=list)
    # Parallel structure: list of groups (index ranges) for inspection.
    num_barriers: int = 0

    def append(self, cmd: Command):
        self.commands.append(cmd)

    def barrier(self):
        # Collapse consecutive barriers; a leading barrier is meaningless.
        if self.commands and self.commands[-1].kind != BARRIER:
            self.commands.append(Command(BARRIER))
            self.num_barriers += 1

    def __iter__(self):
        return iter(self.commands)

    def __len__(self):
        return len(self.commands)

    def run_commands(self):
        return [c for c in self.commands if c.kind != BARRIER]


def slice_widths(cfg: ArchConfig, d_in: int) -> list:
    """Feature-slice widths for one program (tiling f, last slice ragged)."""
    f = cfg.tiling_f if cfg.tiling_f > 0 else d_in
    return [min(f, d_in - lo) for lo in range(0, d_in, f)]


def auto_chunks(cfg: ArchConfig, d_in: int, d_out: int) -> tuple:
    """Largest chunk sizes whose double-buffered slices fit the nodeflow SRAM."""
    half = cfg.nodeflow_capacity_bytes // 2
    w_in = max(slice_widths(cfg, d_in))
    nc = cfg.chunk_in or max(1, half // (w_in * ELEM_BYTES))
    mc = cfg.chunk_out or max(1, half // (d_out * ELEM_BYTES))
    return nc, mc


def resolve_program_nodeflow(program, nf: LayerNodeflow) -> LayerNodeflow:
    if program.nodeflow == NF_LAYER:
        return nf
    if program.nodeflow == NF_IDENTITY_IN:
        return identity_nodeflow(nf.u_ids)
    if program.nodeflow == NF_IDENTITY_OUT:
        return identity_nodeflow(nf.v_ids)
    raise InvariantError(f"bad nodeflow selector {program.nodeflow}")


def partition_for_plan(plan: ModelPlan, nfs: list, cfg: ArchConfig) -> list:
    """One PartitionedNodeflow per program, chunked to fit the buffers."""
    pnfs = []
    for program in plan.programs:
        base = resolve_program_nodeflow(program, nfs[program.layer])
        nc, mc = auto_chunks(cfg, program.d_in, program.d_out)
        pnfs.append(partition_nodeflow(base, nc, mc))
    return pnfs


def program_weight_bytes(plan: ModelPlan, program) -> int:
    if program.transform is None:
        return 0
    total = plan.weights[program.transform.weight].raw.size * ELEM_BYTES
    if program.transform.bias is not None:
        total += plan.weights[program.transform.bias].raw.size * ELEM_BYTES
    return total


def _block_stats(edges: np.ndarray) -> tuple:
    if len(edges) == 0:
        return 0, 0
    per_in = np.bincount(edges[:, 0])
    per_out = np.bincount(edges[:, 1])
    return int(per_in.max()), int(per_out.max())


@dataclass
class _Stage:
    """One software-pipeline stage: the loads, edge blocks, and vertex work
    of a single (column, slice) step, plus trailing per-column update."""

    loads: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    vertex: list = field(default_factory=list)
    update: list = field(default_factory=list)


def build_command_stream(plan: ModelPlan, pnfs: list, cfg: ArchConfig) -> CommandStream:
    """Schedule every program's loads and phase commands with barriers.

    pnfs is aligned with plan.programs (see partition_for_plan). Feature
    loads are emitted for programs that read the external feature store
    (layer 0 reading slot 'h'); later layers consume on-chip values. With
    feature caching on, a chunk's loads appear only in the first column
    that touches it. Empty blocks are skipped.
    """
    if len(pnfs) != len(plan.programs):
        raise SchedulingError("need one partitioned nodeflow per program")
    stream = CommandStream()
    half_capacity = cfg.nodeflow_capacity_bytes // 2

    per_program_stages = []
    for pi, program in enumerate(plan.programs):
        pnf = pnfs[pi]
        widths = slice_widths(cfg, program.d_in)
        chunk_bytes = pnf.nc * max(widths) * ELEM_BYTES
        if chunk_bytes > half_capacity:
            raise SchedulingError(
                f"{program.name}: block of {pnf.nc} x {max(widths)} elements "
                f"({chunk_bytes} B) exceeds the double-buffered nodeflow "
                f"capacity ({half_capacity} B)"
            )
        if cfg.weights_on_chip:
            wbytes = program_weight_bytes(plan, program)
            if wbytes > cfg.weight_buffer_bytes:
                raise SchedulingError(
                    f"{program.name}: weights ({wbytes} B) exceed the global "
                    f"weight buffer ({cfg.weight_buffer_bytes} B)"
                )
        loads_dram = program.layer == 0 and "h" in program.input_slots

        stages = []
        seen_chunks: set = set()
        first_vertex = True
        for j in range(pnf.num_output_chunks):
            touching = pnf.chunks_touching_column(j)
            if cfg.cache_partition_features:
                new_chunks = [i for i in touching if i not in seen_chunks]
                seen_chunks.update(touching)
            else:
                new_chunks = touching
            out_sl = pnf.output_chunk_slice(j)
            live = out_sl.stop - out_sl.start
            blocks = [(i, pnf.block_edges(i, j)) for i in touching]
            for s, width in enumerate(widths):
                st = _Stage()
                if loads_dram:
                    for i in new_chunks:
                        n_rows = len(pnf.input_chunk_ids(i))
                        st.loads.append(
                            Command(
                                LOAD_FEATURES,
                                prog=pi,
                                column=j,
                                chunk=i,
                                slice_idx=s,
                                rows=n_rows,
                                elems=width,
                                bytes=n_rows * width * ELEM_BYTES,
                            )
                        )
                for i, bedges in blocks:
                    if len(bedges) == 0:
                        continue
                    max_in, max_out = _block_stats(bedges)
                    st.edges.append(
                        Command(
                            RUN_EDGE,
                            prog=pi,
                            column=j,
                            chunk=i,
                            slice_idx=s,
                            edges=len(bedges),
                            elems=width,
                            max_per_input=max_in,
                            max_per_output=max_out,
                            needs_r0=program.needs_r0,
                        )
                    )
                if program.transform is not None and live:
                    st.vertex.append(
                        Command(
                            RUN_VERTEX,
                            prog=pi,
                            column=j,
                            slice_idx=s,
                            rows=live,
                            elems=width,
                            d_out=program.d_out,
                            first_of_program=first_vertex,
                        )
                    )
                    first_vertex = False
                stages.append(st)
            if live:
                stages[-1].update.append(
                    Command(
                        RUN_UPDATE,
                        prog=pi,
                        column=j,
                        rows=live,
                        elems=program.d_out,
                        d_out=program.d_out,
                    )
                )
        per_program_stages.append(stages)

    # Weights stay resident in the global weight buffer across inferences
    # (the steady-state serving model); what moves during execution are the
    # global-buffer -> tile-buffer slab streams, which the vertex unit cost
    # accounts for. No DRAM weight transfers appear on the latency path.
    for stages in per_program_stages:
        _emit_pipeline(stream, stages, cfg)
        stream.barrier()
    return stream


def _emit_pipeline(stream: CommandStream, stages: list, cfg: ArchConfig):
    """Software-pipeline the stage list into barrier-separated groups.

    Group t carries stage t's loads, stage t-1's edge work, stage t-2's
    vertex work, and stage t-3's update, so loading, edge-accumulate, and
    vertex-accumulate overlap across consecutive slices and columns.
    """
    if not cfg.pipeline_partitions:
        for st in stages:
            for cmd in st.loads + st.edges + st.vertex + st.update:
                stream.append(cmd)
                stream.barrier()
        return
    n = len(stages)
    for t in range(n + 3):
        group = []
        if t < n:
            group += stages[t].loads
        if 1 <= t <= n:
            group += stages[t - 1].edges
        if 2 <= t <= n + 1:
            group += stages[t - 2].vertex
        if 3 <= t <= n + 2:
            upd = stages[t - 3].update
            if upd and not cfg.pipeline_update:
                # A non-pipelined update stalls the stream around itself.
                stream.barrier()
                for cmd in upd:
                    stream.append(cmd)
                stream.barrier()
            else:
                group += upd
        if group:
            for cmd in group:
                stream.append(cmd)
            stream.barrier()


def validate_stream(stream: CommandStream, plan: ModelPlan, pnfs: list, cfg: ArchConfig):
    """Check the dependency contract: every run command is preceded, across
    at least one barrier, by the loads and phase results it consumes."""
    done_groups: list = []
    current: list = []
    for cmd in stream:
        if cmd.kind == BARRIER:
            done_groups.append(current)
            current = []
        else:
            current.append(cmd)
    if current:
        done_groups.append(current)

    loaded: set = set()
    edge_done: dict = {}
    vertex_done: dict = {}
    updated: set = set()
    for group in done_groups:
        for cmd in group:
            if cmd.prog < 0:
                continue
            program = plan.programs[cmd.prog]
            pnf = pnfs[cmd.prog]
            if cmd.kind == RUN_EDGE:
                if (
                    program.layer == 0
                    and "h" in program.input_slots
                    and (cmd.prog, cmd.chunk, cmd.slice_idx) not in loaded
                ):
                    raise InvariantError(
                        f"edge command for block ({cmd.chunk},{cmd.column}) "
                        f"slice {cmd.slice_idx} runs before its feature load"
                    )
            elif cmd.kind == RUN_VERTEX:
                expected = sum(
                    1 for i in pnf.chunks_touching_column(cmd.column)
                    if len(pnf.block_edges(i, cmd.column))
                )
                have = edge_done.get((cmd.prog, cmd.column, cmd.slice_idx), 0)
                if have < expected:
                    raise InvariantError(
                        f"vertex command for column {cmd.column} slice "
                        f"{cmd.slice_idx} runs before all edge blocks finish"
                    )
            elif cmd.kind == RUN_UPDATE:
                n_slices = len(slice_widths(cfg, program.d_in))
                if program.transform is not None:
                    done = vertex_done.get((cmd.prog, cmd.column), set())
                    if len(done) < n_slices:
                        raise InvariantError(
                            f"update for column {cmd.column} runs before "
                            "vertex-accumulate finishes"
                        )
                if (cmd.prog, cmd.column) in updated:
                    raise InvariantError("duplicate update command")
        for cmd in group:
            if cmd.kind == LOAD_FEATURES:
                loaded.add((cmd.prog, cmd.chunk, cmd.slice_idx))
            elif cmd.kind == RUN_EDGE:
                key = (cmd.prog, cmd.column, cmd.slice_idx)
                edge_done[key] = edge_done.get(key, 0) + 1
            elif cmd.kind == RUN_VERTEX:
                vertex_done.setdefault((cmd.prog, cmd.column), set()).add(cmd.slice_idx)
            elif cmd.kind == RUN_UPDATE:
                updated.add((cmd.prog, cmd.column))
    return True
