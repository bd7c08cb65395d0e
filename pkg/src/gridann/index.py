"""Index construction: grid partition, per-cell graphs, inter-cell edges.

Build order: pick partition attributes, cut the quantile grid, build one
fixed-degree proximity graph per cell (NN-descent plus rank-based pruning;
tiny cells get the exact complete graph), then connect every node to its
approximate nearest neighbors inside every other cell.  Vectors are scalar
quantized for the traversal tier and a cluster histogram is attached for
query-time cell ordering.

All randomness is counter-hashed from params.rng_seed, so two builds of the
same dataset produce identical indexes; per-cell graph builds are independent
and run in a thread pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import Dataset
from .grid import (CellAssignment, GridSpec, assign_cells, build_grid,
                   cells_intersecting, partition_segment_counts,
                   select_partition_attributes)
from .histogram import ClusterHistogram, build_histogram
from .quantize import Codebook, quantize_vectors

FORMAT_VERSION = 1

# seed-stream tags so build stages draw from disjoint random streams
_SEED_INTRA = 1
_SEED_INTER = 2
_SEED_KMEANS = 3


_U64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    """splitmix64 step on python ints."""
    x = (x + 0x9E3779B97F4A7C15) & _U64
    z = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _U64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _U64
    return z ^ (z >> 31)


def derive_seed(seed: int, *counters: int) -> int:
    """Stable sub-seed from a base seed and integer counters (int64-safe)."""
    h = seed & _U64
    for c in counters:
        h = _mix64((h + c) & _U64)
    return h & 0x7FFF_FFFF_FFFF_FFFF


@dataclass(frozen=True)
class BuildParams:
    """Construction-time knobs; defaults match the desk-scale sweet spot."""

    num_cells: int = 16          # joint grid cells (S)
    num_partition_attrs: int | None = None  # None picks min(m, 4)
    intra_degree: int = 16       # out-degree of each per-cell graph (d)
    inter_degree: int = 2        # neighbors stored per foreign cell (l)
    ef_construction: int = 100   # candidate budget for inter-edge searches
    knn_iterations: int = 10     # NN-descent round cap
    num_clusters: int = 256      # histogram k-means regions (K_c)
    top_m: int = 8               # regions summed by the cardinality estimator
    kmeans_iterations: int = 25
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_cells < 1:
            raise ValueError("num_cells must be >= 1")
        if self.intra_degree < 1:
            raise ValueError("intra_degree must be >= 1")
        if self.inter_degree < 1:
            raise ValueError("inter_degree must be >= 1")
        if self.ef_construction < max(self.inter_degree, 1):
            raise ValueError("ef_construction must be >= inter_degree")
        if self.knn_iterations < 1:
            raise ValueError("knn_iterations must be >= 1")


@dataclass
class IntraCellGraph:
    """Fixed-degree proximity graph of one cell; neighbor ids are global."""

    cell_id: int
    adjacency: np.ndarray  # (cell_size, width) int32, width = min(d, size - 1)


@dataclass
class InterCellEdges:
    """edges[node, cell, :] = up to l nearest members of that foreign cell."""

    edges: np.ndarray  # (n, num_cells, l) int32, -1 padded; own-cell rows -1


@dataclass
class GridGraphIndex:
    grid: GridSpec
    assignment: CellAssignment
    intra: list            # list[IntraCellGraph], one per cell
    inter: InterCellEdges
    histogram: ClusterHistogram
    codebook: Codebook
    codes: np.ndarray      # (n, dim) uint8
    attributes: np.ndarray  # (n, m) float64
    params: BuildParams
    format_version: int = FORMAT_VERSION
    vectors: np.ndarray | None = None  # original vectors; not serialized
    _intra_padded: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.codes)

    @property
    def dim(self) -> int:
        return self.codes.shape[1]

    @property
    def num_cells(self) -> int:
        return self.assignment.num_cells

    def attach_vectors(self, vectors: np.ndarray) -> None:
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.shape != self.codes.shape:
            raise ValueError(f"vector shape {vectors.shape} does not match "
                             f"index shape {self.codes.shape}")
        self.vectors = vectors

    def intra_padded(self) -> np.ndarray:
        """(n, d) -1 padded global adjacency; built on first use."""
        if self._intra_padded is None:
            width = max((g.adjacency.shape[1] for g in self.intra), default=0)
            width = max(width, 1)
            pad = np.full((self.n, width), -1, dtype=np.int32)
            for g in self.intra:
                ids = self.assignment.members(g.cell_id)
                if len(ids) and g.adjacency.shape[1]:
                    pad[ids, :g.adjacency.shape[1]] = g.adjacency
            self._intra_padded = pad
        return self._intra_padded


def _complete_graph(vectors: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Exact adjacency for a tiny cell: all others, sorted by (distance, id)."""
    size = len(members)
    adj = np.full((size, max(size - 1, 0)), -1, dtype=np.int32)
    if size <= 1:
        return adj
    dists = np.empty(size, dtype=np.float32)
    for r, node in enumerate(members):
        _kernels.raw_dists_batch(vectors[node], vectors, members, dists)
        order = np.lexsort((members, dists))
        row = members[order]
        adj[r] = row[row != node][:size - 1]
    return adj


def _cell_graph(vectors: np.ndarray, members: np.ndarray,
                params: BuildParams, seed: int) -> np.ndarray:
    size = len(members)
    if size <= params.intra_degree + 1:
        return _complete_graph(vectors, members)
    local = np.ascontiguousarray(vectors[members])
    k = 2 * params.intra_degree
    max_cand = max(8, k // 2)
    knn_i, knn_d, sizes = _kernels.nn_descent(local, k, max_cand,
                                              params.knn_iterations, 0.001,
                                              seed)
    adj_local = _kernels.diversify(local, knn_i, knn_d, sizes,
                                   params.intra_degree)
    adj = np.where(adj_local >= 0, members[np.clip(adj_local, 0, None)],
                   np.int32(-1)).astype(np.int32)
    return adj


def build_intra_graphs(vectors: np.ndarray, assignment: CellAssignment,
                       params: BuildParams) -> list[IntraCellGraph]:
    """One proximity graph per cell, built independently (thread pool)."""
    cells = range(assignment.num_cells)

    def build_one(cid):
        members = assignment.members(cid)
        seed = derive_seed(params.rng_seed, _SEED_INTRA, cid)
        return IntraCellGraph(cid, _cell_graph(vectors, members, params, seed))

    workers = min(os.cpu_count() or 1, max(assignment.num_cells, 1))
    if workers <= 1:
        return [build_one(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(build_one, cells))


def build_inter_edges(vectors: np.ndarray, assignment: CellAssignment,
                      intra: list, params: BuildParams) -> InterCellEdges:
    """Top-l greedy-search results for every (node, foreign cell) pair."""
    n = len(vectors)
    num_cells = assignment.num_cells
    widths = np.array([g.adjacency.shape[1] for g in intra], dtype=np.int64)
    sizes = assignment.cell_sizes()
    adj_start = np.zeros(num_cells + 1, dtype=np.int64)
    np.cumsum(widths * sizes, out=adj_start[1:])
    adj_flat = np.empty(int(adj_start[-1]), dtype=np.int32)
    for g in intra:
        c = g.cell_id
        adj_flat[adj_start[c]:adj_start[c] + widths[c] * sizes[c]] = \
            g.adjacency.ravel()
    out = np.full((n, num_cells, params.inter_degree), -1, dtype=np.int32)
    if n:
        n_seed = max(params.intra_degree, params.inter_degree)
        _kernels.build_inter_edges(
            np.ascontiguousarray(vectors, dtype=np.float32),
            assignment.cell_of, assignment.member_rank,
            assignment.members_flat, assignment.members_start,
            adj_flat, adj_start[:-1], widths.astype(np.int64),
            params.inter_degree, params.ef_construction, n_seed,
            derive_seed(params.rng_seed, _SEED_INTER), out)
    return InterCellEdges(edges=out)


def build_index(dataset: Dataset, params: BuildParams | None = None) -> GridGraphIndex:
    """End-to-end index build over an in-memory dataset."""
    params = params or BuildParams()
    m = dataset.num_attributes
    if m == 0:
        grid = GridSpec(attrs=np.empty(0, np.int32),
                        segments=np.empty(0, np.int32),
                        boundaries=[], seg_lo=[], seg_hi=[])
    else:
        p = params.num_partition_attrs or min(m, 4)
        attrs = select_partition_attributes(dataset.attributes, p)
        counts = partition_segment_counts(params.num_cells, p)
        grid = build_grid(dataset.attributes, attrs, counts)
    assignment = assign_cells(dataset.attributes, grid)
    intra = build_intra_graphs(dataset.vectors, assignment, params)
    inter = build_inter_edges(dataset.vectors, assignment, intra, params)
    codebook, codes = quantize_vectors(dataset.vectors)
    histogram = build_histogram(
        dataset.vectors, assignment, num_clusters=params.num_clusters,
        top_m=params.top_m, max_iter=params.kmeans_iterations,
        seed=derive_seed(params.rng_seed, _SEED_KMEANS))
    return GridGraphIndex(grid=grid, assignment=assignment, intra=intra,
                          inter=inter, histogram=histogram,
                          codebook=codebook, codes=codes,
                          attributes=dataset.attributes.copy(),
                          params=params, vectors=dataset.vectors)


def query_cells(index: GridGraphIndex, predicates) -> np.ndarray:
    """Non-empty cells a filtered query must consider."""
    return cells_intersecting(index.grid, index.assignment, predicates)
