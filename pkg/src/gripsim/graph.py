"""Graph ingest: loaders, synthetic generators, feature stores, statistics.

Graphs are immutable compressed-adjacency structures. Vertex ids are
remapped to dense 0..n-1 on ingest; the original ids are kept in a side
array. Duplicate edges and self-loops are preserved because downstream
sampling handles multiplicity explicitly.

On-disk formats (little-endian):
  binary CSR   magic "GRIPCSR1", u64 num_vertices, u64 num_edges,
               u64 offsets[(n+1)], u32 targets[m]
  features     magic "GRIPFEA1", u64 rows, u32 dim, u8 precision tag,
               payload row-major. Tag 0 = float64; tag k in 1..15 =
               fixed16 with k fractional bits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import CapacityError, DataError, ParseError, ShapeError, SpecError
from .fxp import FEATURE_FMT, FxFormat, dequantize, quantize

CSR_MAGIC = b"GRIPCSR1"
FEA_MAGIC = b"GRIPFEA1"
_U32_MAX = (1 << 32) - 1


@dataclass
class Graph:
    """Directed graph in compressed adjacency form.

    `out_offsets`/`out_targets` store the adjacency rows used as sampling
    neighborhoods: row v lists the vertices v aggregates from. The optional
    in-adjacency mirror holds the transposed edge set.
    """

    num_vertices: int
    num_edges: int
    out_offsets: np.ndarray
    out_targets: np.ndarray
    in_offsets: np.ndarray | None = None
    in_targets: np.ndarray | None = None
    original_ids: np.ndarray | None = None

    def validate(self):
        off = self.out_offsets
        if len(off) != self.num_vertices + 1:
            raise DataError("offset array has wrong length")
        if off[0] != 0 or off[-1] != self.num_edges:
            raise DataError("offsets must start at 0 and end at num_edges")
        if np.any(np.diff(off) < 0):
            raise DataError("offsets must be non-decreasing")
        if len(self.out_targets) != self.num_edges:
            raise DataError("target array has wrong length")
        if self.num_edges and int(self.out_targets.max()) >= self.num_vertices:
            raise DataError("edge target out of range")
        return self

    def degree(self, v: int) -> int:
        return int(self.out_offsets[v + 1] - self.out_offsets[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.out_offsets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.out_targets[self.out_offsets[v]:self.out_offsets[v + 1]]

    def with_in_adjacency(self) -> "Graph":
        """Return a copy carrying the transposed adjacency mirror."""
        in_off, in_tgt = transpose_adjacency(
            self.num_vertices, self.out_offsets, self.out_targets
        )
        return Graph(
            self.num_vertices,
            self.num_edges,
            self.out_offsets,
            self.out_targets,
            in_off,
            in_tgt,
            self.original_ids,
        )


def transpose_adjacency(n: int, offsets: np.ndarray, targets: np.ndarray):
    """Transpose a CSR adjacency (counting sort by target)."""
    sources = np.repeat(np.arange(n, dtype=np.int64), np.diff(offsets))
    order = np.argsort(targets, kind="stable")
    in_targets = sources[order]
    counts = np.bincount(targets, minlength=n)
    in_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=in_offsets[1:])
    return in_offsets, in_targets


def from_edges(sources, targets, num_vertices=None) -> Graph:
    """Build a Graph from parallel source/target arrays (duplicates kept)."""
    sources = np.asarray(sources, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if num_vertices is None:
        num_vertices = int(max(sources.max(initial=-1), targets.max(initial=-1)) + 1)
    order = np.argsort(sources, kind="stable")
    sources = sources[order]
    targets = targets[order]
    counts = np.bincount(sources, minlength=num_vertices)
    offsets = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return Graph(num_vertices, len(targets), offsets, targets).validate()


def load_edge_list(path) -> Graph:
    """Parse a "src dst" per-line text file; '#' starts a comment line."""
    sources, targets = [], []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ParseError(f"expected 'src dst', got {text!r}", line=lineno)
            try:
                s, t = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer vertex id in {text!r}", line=lineno)
            if s < 0 or t < 0:
                raise ParseError("vertex ids must be non-negative", line=lineno)
            if s > _U32_MAX or t > _U32_MAX:
                raise CapacityError(f"vertex id exceeds u32 at line {lineno}")
            sources.append(s)
            targets.append(t)
    if not sources:
        return Graph(0, 0, np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64))
    src = np.array(sources, dtype=np.int64)
    dst = np.array(targets, dtype=np.int64)
    # Remap arbitrary ids to dense 0..n-1 (sorted order), keep the originals.
    uniq = np.unique(np.concatenate([src, dst]))
    lookup = {int(v): i for i, v in enumerate(uniq)}
    src = np.array([lookup[int(v)] for v in src], dtype=np.int64)
    dst = np.array([lookup[int(v)] for v in dst], dtype=np.int64)
    g = from_edges(src, dst, num_vertices=len(uniq))
    g.original_ids = uniq
    return g


def save_csr(graph: Graph, path):
    if graph.num_edges and int(graph.out_targets.max()) > _U32_MAX:
        raise CapacityError("vertex id exceeds u32; cannot serialize")
    with open(path, "wb") as fh:
        fh.write(CSR_MAGIC)
        fh.write(struct.pack("<QQ", graph.num_vertices, graph.num_edges))
        fh.write(graph.out_offsets.astype("<u8").tobytes())
        fh.write(graph.out_targets.astype("<u4").tobytes())


def load_csr(path) -> Graph:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CSR_MAGIC:
            raise DataError(f"bad magic {magic!r}; not a binary CSR file")
        n, m = struct.unpack("<QQ", fh.read(16))
        offsets = np.frombuffer(fh.read(8 * (n + 1)), dtype="<u8").astype(np.int64)
        targets = np.frombuffer(fh.read(4 * m), dtype="<u4").astype(np.int64)
        if len(offsets) != n + 1 or len(targets) != m:
            raise DataError("truncated CSR file")
    return Graph(int(n), int(m), offsets, targets).validate()


def load_graph(path, format: str = "auto") -> Graph:
    """Load a graph from an edge-list or binary CSR file."""
    if format == "auto":
        with open(path, "rb") as fh:
            format = "binary-csr" if fh.read(8) == CSR_MAGIC else "edge-list"
    if format == "edge-list":
        return load_edge_list(path)
    if format == "binary-csr":
        return load_csr(path)
    raise SpecError(f"unknown graph format {format!r}")


def generate_synthetic(kind: str, n: int, avg_degree: int, seed: int) -> Graph:
    """Deterministic synthetic graph: 'uniform-random' or 'power-law'.

    Power-law out-degrees follow a scaled Zipf draw, so a few vertices have
    degrees far above the mean while most sit below it.
    """
    if n < 1:
        raise SpecError("n must be >= 1")
    if avg_degree < 0:
        raise SpecError("avg_degree must be >= 0")
    if avg_degree >= n:
        raise SpecError("avg_degree must be smaller than n")
    gen = rng.stream(seed, rng.TAG_GRAPH, {"uniform-random": 0, "power-law": 1}.get(kind, -1))
    if kind == "uniform-random":
        m = n * avg_degree
        src = gen.integers(0, n, size=m, dtype=np.int64)
        dst = gen.integers(0, n, size=m, dtype=np.int64)
        return from_edges(src, dst, num_vertices=n)
    if kind == "power-law":
        if avg_degree == 0:
            return Graph(n, 0, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))
        raw = gen.zipf(2.5, size=n).astype(np.float64)
        # zipf(2.5) has mean zeta(1.5)/zeta(2.5) ~= 1.947; rescale to the target.
        degrees = np.minimum(np.rint(raw * (avg_degree / 1.947)), n - 1).astype(np.int64)
        src = np.repeat(np.arange(n, dtype=np.int64), degrees)
        dst = gen.integers(0, n, size=int(degrees.sum()), dtype=np.int64)
        return from_edges(src, dst, num_vertices=n)
    raise SpecError(f"unknown synthetic kind {kind!r}")


@dataclass
class FeatureStore:
    """Per-vertex feature rows, either float64 or quantized fixed16."""

    values: np.ndarray  # float64 (rows x dim) or int16 raw codes
    dim: int
    fmt: FxFormat | None = None  # None means float64 storage

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def is_fixed(self) -> bool:
        return self.fmt is not None

    def as_real(self) -> np.ndarray:
        if self.is_fixed:
            return dequantize(self.values, self.fmt)
        return self.values

    def quantized(self, fmt: FxFormat = FEATURE_FMT) -> "FeatureStore":
        if self.is_fixed:
            return self
        return FeatureStore(quantize(self.values, fmt), self.dim, fmt)

    def dequantized(self) -> "FeatureStore":
        if not self.is_fixed:
            return self
        return FeatureStore(dequantize(self.values, self.fmt), self.dim, None)


def attach_features(graph: Graph, dim: int, source="seeded-random", seed: int = 0) -> FeatureStore:
    """Attach per-vertex features: seeded uniform [-1, 1) or a feature file."""
    if dim < 1:
        raise SpecError("dim must be >= 1")
    if source == "seeded-random":
        gen = rng.stream(seed, rng.TAG_FEATURES, dim)
        values = gen.uniform(-1.0, 1.0, size=(graph.num_vertices, dim))
        return FeatureStore(values, dim, None)
    store = load_features(source)
    if store.rows != graph.num_vertices:
        raise ShapeError(
            f"feature file has {store.rows} rows, graph has {graph.num_vertices} vertices"
        )
    if store.dim != dim:
        raise ShapeError(f"feature file dim {store.dim} != requested {dim}")
    return store


def save_features(store: FeatureStore, path):
    tag = 0 if not store.is_fixed else store.fmt.frac_bits
    with open(path, "wb") as fh:
        fh.write(FEA_MAGIC)
        fh.write(struct.pack("<QIB", store.rows, store.dim, tag))
        if store.is_fixed:
            fh.write(store.values.astype("<i2").tobytes())
        else:
            fh.write(store.values.astype("<f8").tobytes())


def load_features(path) -> FeatureStore:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != FEA_MAGIC:
            raise DataError(f"bad magic {magic!r}; not a feature file")
        rows, dim, tag = struct.unpack("<QIB", fh.read(13))
        if tag == 0:
            data = np.frombuffer(fh.read(8 * rows * dim), dtype="<f8")
            if data.size != rows * dim:
                raise DataError("truncated feature file")
            return FeatureStore(data.reshape(rows, dim).copy(), int(dim), None)
        if not 1 <= tag <= 15:
            raise DataError(f"bad precision tag {tag}")
        data = np.frombuffer(fh.read(2 * rows * dim), dtype="<i2")
        if data.size != rows * dim:
            raise DataError("truncated feature file")
        return FeatureStore(
            data.reshape(rows, dim).copy(), int(dim), FxFormat(16 - tag, tag)
        )


@dataclass
class GraphStats:
    """Structural statistics: degree quantiles, sampled k-hop size, block density."""

    degree_quantiles: dict
    median_khop: float
    khop_sizes: np.ndarray
    block_histogram: dict = field(default_factory=dict)
    nonempty_block_fraction: float = 0.0


def graph_stats(
    graph: Graph,
    sample_sizes,
    seed: int = 0,
    trials: int = 64,
    block_size: int = 64,
) -> GraphStats:
    """Compute degree quantiles and the sampled k-hop neighborhood median.

    The k-hop size is measured with the same deterministic sampler used for
    nodeflow construction, over `trials` uniformly drawn root vertices.
    """
    from .nodeflow import sampled_khop_size  # local import to avoid a cycle

    if trials < 1:
        raise SpecError("trials must be >= 1")
    degs = graph.degrees()
    qs = [0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0]
    quantiles = {q: float(np.quantile(degs, q)) if len(degs) else 0.0 for q in qs}

    roots = rng.stream(seed, rng.TAG_ROOTS).integers(
        0, graph.num_vertices, size=trials, dtype=np.int64
    )
    sizes = np.array(
        [sampled_khop_size(graph, int(r), sample_sizes, seed) for r in roots],
        dtype=np.int64,
    )

    # Edge-block density over a fixed chunk grid of the adjacency matrix.
    nblocks = -(-graph.num_vertices // block_size) if graph.num_vertices else 0
    hist: dict = {}
    nonempty = 0.0
    if nblocks and graph.num_edges:
        src = np.repeat(np.arange(graph.num_vertices), degs) // block_size
        dst = graph.out_targets // block_size
        block_ids = src * nblocks + dst
        counts = np.bincount(block_ids.astype(np.int64))
        counts = counts[counts > 0]
        nonempty = len(counts) / float(nblocks * nblocks)
        buckets = np.floor(np.log2(counts)).astype(int)
        for b, c in zip(*np.unique(buckets, return_counts=True)):
            hist[int(2**b)] = int(c)

    return GraphStats(
        degree_quantiles=quantiles,
        median_khop=float(np.median(sizes)),
        khop_sizes=sizes,
        block_histogram=hist,
        nonempty_block_fraction=nonempty,
    )
