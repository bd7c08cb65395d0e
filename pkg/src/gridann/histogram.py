"""Cluster histogram for query-adaptive cell ordering.

A k-means clustering of the vectors gives K_c coarse regions; the histogram
counts how many members of each grid cell fall in each region.  At query time
the top_m regions nearest to the query vector proxy for its neighborhood, and
cells are visited in decreasing order of their member count inside those
regions (ties toward the smaller cell id).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import CellAssignment


def _sq_dists_to_centroids(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared euclidean distances, float64 for stable argmins."""
    x = x.astype(np.float64)
    c = centroids.astype(np.float64)
    d = (x * x).sum(axis=1)[:, None] - 2.0 * (x @ c.T) + (c * c).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans(vectors: np.ndarray, k: int, max_iter: int = 25,
           seed: int = 0) -> np.ndarray:
    """Lloyd's k-means with k-means++ seeding and a fixed iteration cap.

    Hand-rolled so builds stay byte-reproducible for a fixed seed; empty
    clusters keep their previous centroid.
    """
    vectors = np.asarray(vectors, dtype=np.float32)
    n = len(vectors)
    k = min(k, n)
    if k < 1:
        raise ValueError("k must be positive")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, vectors.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = vectors[first]
    closest = _sq_dists_to_centroids(vectors, centroids[:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            pick = int(rng.integers(n))
        else:
            r = rng.random() * total
            pick = int(np.searchsorted(np.cumsum(closest), r))
            pick = min(pick, n - 1)
        centroids[j] = vectors[pick]
        d = _sq_dists_to_centroids(vectors, centroids[j:j + 1]).ravel()
        np.minimum(closest, d, out=closest)

    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d = _sq_dists_to_centroids(vectors, centroids)
        new_assign = d.argmin(axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            mask = assign == j
            if mask.any():
                centroids[j] = vectors[mask].mean(axis=0, dtype=np.float64)
    return centroids.astype(np.float32)


@dataclass
class ClusterHistogram:
    """Per-cell member counts inside each k-means region."""

    centroids: np.ndarray  # (K_c, dim) float32
    counts: np.ndarray     # (num_cells, K_c) int64
    top_m: int

    @property
    def num_clusters(self) -> int:
        return len(self.centroids)


def build_histogram(vectors: np.ndarray, assignment: CellAssignment,
                    num_clusters: int = 256, top_m: int = 8,
                    max_iter: int = 25, seed: int = 0) -> ClusterHistogram:
    centroids = kmeans(vectors, num_clusters, max_iter=max_iter, seed=seed)
    labels = _sq_dists_to_centroids(vectors, centroids).argmin(axis=1)
    num_cells = assignment.num_cells
    counts = np.zeros((num_cells, len(centroids)), dtype=np.int64)
    np.add.at(counts, (assignment.cell_of, labels), 1)
    return ClusterHistogram(centroids=centroids, counts=counts,
                            top_m=min(top_m, len(centroids)))


def estimate_cardinalities(histogram: ClusterHistogram, query_vector: np.ndarray,
                           cells: np.ndarray) -> np.ndarray:
    """Estimated near-query member count for each given cell.

    Sums histogram counts over the top_m regions nearest to the query vector
    (region ties broken toward the lower cluster index).
    """
    q = np.asarray(query_vector, dtype=np.float32)[None, :]
    d = _sq_dists_to_centroids(q, histogram.centroids).ravel()
    k = histogram.num_clusters
    top = np.lexsort((np.arange(k), d))[:histogram.top_m]
    return histogram.counts[np.asarray(cells, dtype=np.int64)][:, top].sum(axis=1)


def order_cells(cells: np.ndarray, cardinalities: np.ndarray) -> np.ndarray:
    """Cells sorted by descending estimated cardinality, ties ascending id."""
    cells = np.asarray(cells, dtype=np.int32)
    order = np.lexsort((cells, -np.asarray(cardinalities, dtype=np.int64)))
    return np.ascontiguousarray(cells[order])
