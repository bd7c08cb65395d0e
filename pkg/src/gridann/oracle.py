"""Exact ground truth for filtered nearest neighbor queries.

Deliberately independent of the engine: plain float64 numpy over the raw
vectors, no quantization, no shared kernels.  Every recall number in the
benchmarks and tests references this scan.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset, RangeQuery


def brute_force_search(dataset: Dataset, query: RangeQuery,
                       k: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-k (ids, squared distances) among records passing the filter.

    Distances in float64, full sort, ties broken by smaller id; fewer than k
    matches return all of them.
    """
    k = k if k is not None else query.k
    mask = np.ones(dataset.n, dtype=bool)
    for attr, low, high in query.predicates:
        col = dataset.attributes[:, attr]
        mask &= (col >= low) & (col <= high)
    ids = np.flatnonzero(mask)
    if len(ids) == 0:
        return np.empty(0, np.int64), np.empty(0, np.float64)
    diffs = dataset.vectors[ids].astype(np.float64) - \
        np.asarray(query.vector, dtype=np.float64)
    dists = np.einsum("ij,ij->i", diffs, diffs)
    order = np.lexsort((ids, dists))[:k]
    return ids[order].astype(np.int64), dists[order]


def recall_at_k(result_ids, oracle_ids, k: int) -> float:
    """|result ∩ oracle| / min(k, |oracle|); an empty oracle counts as 1.0."""
    oracle = set(np.asarray(oracle_ids).tolist())
    if not oracle:
        return 1.0
    hits = len(oracle & set(np.asarray(result_ids).tolist()))
    return hits / min(k, len(oracle))


def mean_recall(results, oracles, k: int) -> float:
    """Average recall_at_k over paired result/oracle id lists."""
    if len(results) != len(oracles):
        raise ValueError("results and oracles must pair up")
    if not results:
        return 1.0
    return float(np.mean([recall_at_k(r, o, k) for r, o in zip(results, oracles)]))
