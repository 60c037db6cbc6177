"""Neighbor sampling, per-layer nodeflow construction, and edge-block partitioning.

A layer nodeflow is the bipartite (U, V, E) structure describing one
propagation step: U are the vertices read, V the vertices updated, and E
connects positions in U to positions in V. Nodeflows are built back to
front starting from the target vertices, so layer l's V array is exactly
layer l+1's U array (same order).

Binary dump format (little-endian): magic "GRIPNF01", u32 layer count,
then per layer u32 |U|, u32 |V|, u32 |E|, u8 identity flag, U ids (u32),
V ids (u32), edge triples (u32 x 3: u_index, v_index, edge_data_index).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DataError, SpecError
from .graph import Graph

NF_MAGIC = b"GRIPNF01"


def sample_neighbors(graph: Graph, v: int, k: int, layer: int, seed: int) -> np.ndarray:
    """Deterministic fixed-size uniform sample of v's neighbors.

    Returns all neighbors when degree(v) <= k, else a uniform k-subset.
    The draw is a pure function of (seed, layer, v); samples for different
    layers are independent streams.
    """
    if k < 1:
        raise SpecError("sample size k must be >= 1")
    if not 0 <= v < graph.num_vertices:
        raise SpecError(f"vertex id {v} out of range")
    nbrs = graph.neighbors(v)
    if len(nbrs) <= k:
        return nbrs.copy()
    gen = rng.stream(seed, rng.TAG_SAMPLE, layer, v)
    return rng.sample_without_replacement(gen, nbrs, k)


@dataclass
class LayerNodeflow:
    """One layer's bipartite propagation structure."""

    u_ids: np.ndarray  # global vertex ids read
    v_ids: np.ndarray  # global vertex ids updated
    edges: np.ndarray  # (E x 3) int64: u_index, v_index, edge_data_index
    identity: bool = False

    @property
    def num_inputs(self) -> int:
        return len(self.u_ids)

    @property
    def num_outputs(self) -> int:
        return len(self.v_ids)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def validate(self, graph: Graph | None = None):
        if self.num_edges:
            if int(self.edges[:, 0].max()) >= self.num_inputs:
                raise DataError("edge u_index out of range")
            if int(self.edges[:, 1].max()) >= self.num_outputs:
                raise DataError("edge v_index out of range")
            covered = np.zeros(self.num_outputs, dtype=bool)
            covered[self.edges[:, 1]] = True
            if not covered.all():
                raise DataError("an output vertex has no incident edge")
        elif self.num_outputs:
            raise DataError("non-empty nodeflow without edges")
        if self.identity:
            if not np.array_equal(self.u_ids, self.v_ids):
                raise DataError("identity nodeflow must have U == V")
            expect = np.arange(len(self.u_ids))
            if not (
                np.array_equal(self.edges[:, 0], expect)
                and np.array_equal(self.edges[:, 1], expect)
            ):
                raise DataError("identity nodeflow must be self-connected only")
        if graph is not None:
            for ids in (self.u_ids, self.v_ids):
                if len(ids) and int(ids.max()) >= graph.num_vertices:
                    raise DataError("nodeflow references a vertex absent from the graph")
        return self


def identity_nodeflow(ids: np.ndarray) -> LayerNodeflow:
    """Nodeflow over `ids` where every vertex is only self-connected."""
    ids = np.asarray(ids, dtype=np.int64)
    idx = np.arange(len(ids), dtype=np.int64)
    edges = np.stack([idx, idx, idx], axis=1)
    return LayerNodeflow(ids, ids.copy(), edges, identity=True)


def build_nodeflow(
    graph: Graph,
    targets,
    sample_sizes,
    seed: int,
    include_self: bool = True,
) -> list[LayerNodeflow]:
    """Build per-layer nodeflows for the given targets, back to front.

    sample_sizes[i] is the neighbor sample size of execution layer i
    (sample_sizes[-1] applies to the targets themselves). When
    `include_self` is set, each output vertex is added to its own sampled
    neighbor list (once), matching models whose aggregate includes self.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        raise SpecError("targets must be nonempty")
    if targets.min() < 0 or targets.max() >= graph.num_vertices:
        raise SpecError("target id out of range")

    layers: list[LayerNodeflow] = []
    v_ids = targets
    for layer in range(len(sample_sizes) - 1, -1, -1):
        k = sample_sizes[layer]
        u_list = list(v_ids)
        u_pos = {int(x): i for i, x in enumerate(u_list)}
        edge_rows = []
        edge_counter = 0
        fresh: list[int] = []
        for vi, v in enumerate(v_ids):
            nbrs = list(sample_neighbors(graph, int(v), k, layer, seed))
            if include_self and int(v) not in map(int, nbrs):
                nbrs.append(int(v))
            for u in nbrs:
                u = int(u)
                if u not in u_pos:
                    fresh.append(u)
                    u_pos[u] = -1  # placeholder until fresh ids are ordered
                edge_rows.append((u, vi, edge_counter))
                edge_counter += 1
        # New vertices go after V in sorted order for a deterministic layout.
        for u in sorted(set(fresh)):
            u_pos[u] = len(u_list)
            u_list.append(u)
        edges = np.array(
            [(u_pos[u], vi, ei) for (u, vi, ei) in edge_rows], dtype=np.int64
        ).reshape(-1, 3)
        nf = LayerNodeflow(np.array(u_list, dtype=np.int64), v_ids, edges)
        layers.append(nf.validate(graph))
        v_ids = nf.u_ids
    layers.reverse()
    return layers


def khop_oracle(graph: Graph, targets, sample_sizes, seed: int, include_self: bool = True):
    """Independent recursive enumeration of the per-layer input vertex sets.

    Test oracle for build_nodeflow: expands sampled neighborhoods directly
    with set arithmetic, sharing only the deterministic sampler.
    """
    frontier = set(int(t) for t in targets)
    per_layer = []
    for layer in range(len(sample_sizes) - 1, -1, -1):
        k = sample_sizes[layer]
        # U always contains V (outputs are re-read by later layers).
        reached = set(frontier)
        for v in frontier:
            reached.update(int(u) for u in sample_neighbors(graph, v, k, layer, seed))
        per_layer.append(reached)
        frontier = reached
    per_layer.reverse()
    return per_layer


def sampled_khop_size(graph: Graph, root: int, sample_sizes, seed: int) -> int:
    """Unique vertices within the sampled k-hop neighborhood of `root`.

    Classic hop expansion: the root's immediate sample uses the innermost
    layer's size, each newly reached vertex is expanded once, and already
    seen vertices are not resampled. Draws reuse the exact (seed, layer,
    vertex) streams of nodeflow construction, so with sizes (s1, s2) the
    result is bounded by 1 + s2 + s2*s1 (and so by 1 + s1 + s1*s2 when
    s1 >= s2).
    """
    seen = {root}
    frontier = [root]
    for hop in range(len(sample_sizes)):
        layer = len(sample_sizes) - 1 - hop
        k = sample_sizes[layer]
        nxt = []
        for v in frontier:
            for u in sample_neighbors(graph, v, k, layer, seed):
                u = int(u)
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    return len(seen)


@dataclass
class PartitionedNodeflow:
    """A nodeflow chunked into Nc x Mc edge blocks, consumed column-major."""

    parent: LayerNodeflow
    nc: int
    mc: int
    num_input_chunks: int
    num_output_chunks: int
    blocks: dict = field(default_factory=dict)  # (i, j) -> (E x 3) edge array

    def block_edges(self, i: int, j: int) -> np.ndarray:
        return self.blocks.get((i, j), _EMPTY_EDGES)

    def block_edge_counts(self) -> np.ndarray:
        counts = np.zeros((self.num_input_chunks, self.num_output_chunks), dtype=np.int64)
        for (i, j), e in self.blocks.items():
            counts[i, j] = len(e)
        return counts

    def input_chunk_ids(self, i: int) -> np.ndarray:
        return self.parent.u_ids[i * self.nc:(i + 1) * self.nc]

    def output_chunk_slice(self, j: int) -> slice:
        lo = j * self.mc
        return slice(lo, min(lo + self.mc, self.parent.num_outputs))

    def iter_column_major(self):
        """Yield (i, j, edges) for non-empty blocks, all i for each j in turn."""
        for j in range(self.num_output_chunks):
            for i in range(self.num_input_chunks):
                edges = self.blocks.get((i, j))
                if edges is not None and len(edges):
                    yield i, j, edges

    def chunks_touching_column(self, j: int) -> list[int]:
        return [i for i in range(self.num_input_chunks) if (i, j) in self.blocks]


_EMPTY_EDGES = np.zeros((0, 3), dtype=np.int64)


def partition_nodeflow(nf: LayerNodeflow, nc: int, mc: int) -> PartitionedNodeflow:
    """Split nf's edges into blocks by (input chunk, output chunk)."""
    if nc < 1 or mc < 1:
        raise SpecError("chunk sizes must be >= 1")
    n_in = max(1, -(-nf.num_inputs // nc))
    n_out = max(1, -(-nf.num_outputs // mc))
    pnf = PartitionedNodeflow(nf, nc, mc, n_in, n_out)
    if nf.num_edges == 0:
        return pnf
    bi = nf.edges[:, 0] // nc
    bj = nf.edges[:, 1] // mc
    keys = bi * n_out + bj
    order = np.argsort(keys, kind="stable")
    sorted_edges = nf.edges[order]
    sorted_keys = keys[order]
    boundaries = np.flatnonzero(np.diff(sorted_keys)) + 1
    for chunk in np.split(sorted_edges, boundaries):
        key = int(chunk[0, 0] // nc) * n_out + int(chunk[0, 1] // mc)
        pnf.blocks[(key // n_out, key % n_out)] = chunk
    return pnf


def save_nodeflows(layers: list[LayerNodeflow], path):
    with open(path, "wb") as fh:
        fh.write(NF_MAGIC)
        fh.write(struct.pack("<I", len(layers)))
        for nf in layers:
            fh.write(
                struct.pack(
                    "<IIIB", nf.num_inputs, nf.num_outputs, nf.num_edges, int(nf.identity)
                )
            )
            fh.write(nf.u_ids.astype("<u4").tobytes())
            fh.write(nf.v_ids.astype("<u4").tobytes())
            fh.write(nf.edges.astype("<u4").tobytes())


def load_nodeflows(path) -> list[LayerNodeflow]:
    with open(path, "rb") as fh:
        if fh.read(8) != NF_MAGIC:
            raise DataError("not a nodeflow dump")
        (count,) = struct.unpack("<I", fh.read(4))
        layers = []
        for _ in range(count):
            nu, nv, ne, ident = struct.unpack("<IIIB", fh.read(13))
            u = np.frombuffer(fh.read(4 * nu), dtype="<u4").astype(np.int64)
            v = np.frombuffer(fh.read(4 * nv), dtype="<u4").astype(np.int64)
            e = np.frombuffer(fh.read(12 * ne), dtype="<u4").astype(np.int64)
            layers.append(LayerNodeflow(u, v, e.reshape(-1, 3), bool(ident)))
    return layers
