"""Synthetic datasets and query workloads with controlled selectivity."""

from __future__ import annotations

import numpy as np

from .core import Dataset, Predicate, RangeQuery


def make_uniform_dataset(n: int, dim: int, num_attributes: int,
                         seed: int = 0) -> Dataset:
    """Vectors and attributes both uniform on [0, 1)."""
    rng = np.random.default_rng(seed)
    vectors = rng.random((n, dim), dtype=np.float32)
    attributes = rng.random((n, num_attributes))
    return Dataset(vectors=vectors, attributes=attributes)


def make_clustered_dataset(n: int, dim: int, num_attributes: int,
                           num_clusters: int = 8, spread: float = 0.05,
                           seed: int = 0) -> Dataset:
    """Gaussian vector clusters whose attribute values track the cluster.

    Each attribute maps clusters to disjoint value bands (in a per-attribute
    shuffled order), so range predicates correlate with vector-space regions;
    this is the workload where cell ordering and cross-cell seeding matter.
    """
    rng = np.random.default_rng(seed)
    centers = rng.random((num_clusters, dim))
    labels = rng.integers(0, num_clusters, size=n)
    vectors = (centers[labels] +
               rng.normal(0.0, spread, (n, dim))).astype(np.float32)
    attributes = np.empty((n, num_attributes))
    for j in range(num_attributes):
        band = rng.permutation(num_clusters)[labels]
        attributes[:, j] = (band + rng.random(n)) / num_clusters
    return Dataset(vectors=vectors, attributes=attributes)


def _predicates_for(rng, attributes: np.ndarray, attrs, widths) -> list:
    preds = []
    for a, w in zip(attrs, widths):
        col = attributes[:, a]
        lo, hi = float(col.min()), float(col.max())
        span = hi - lo
        width = w * span
        start = lo + rng.random() * (span - width)
        preds.append(Predicate(int(a), start, start + width))
    return preds


def measured_selectivity(dataset: Dataset, predicates) -> float:
    mask = np.ones(dataset.n, dtype=bool)
    for attr, low, high in predicates:
        col = dataset.attributes[:, attr]
        mask &= (col >= low) & (col <= high)
    return float(mask.mean())


def generate_queries(dataset: Dataset, count: int, k: int = 10,
                     width: float | None = None,
                     width_range: tuple = (0.01, 1.0),
                     attrs=None, from_data: bool = True,
                     noise: float = 0.0,
                     seed: int = 0) -> tuple[list, np.ndarray]:
    """(queries, measured joint selectivities).

    Per attribute, the predicate interval covers a fraction of the empirical
    value range equal to the target selectivity: `width` fixes that fraction
    for every query, otherwise it is drawn uniformly from width_range per
    query.  Interval positions are uniform.  Query vectors are perturbed
    dataset points when from_data is set, else uniform.
    """
    if not 0 < width_range[0] <= width_range[1] <= 1:
        raise ValueError("width_range must satisfy 0 < lo <= hi <= 1")
    if width is not None and not 0 < width <= 1:
        raise ValueError("width must be in (0, 1]")
    rng = np.random.default_rng(seed)
    attrs = (list(range(dataset.num_attributes)) if attrs is None
             else [int(a) for a in attrs])
    queries = []
    selectivities = np.empty(count)
    for qi in range(count):
        if from_data and dataset.n:
            base = dataset.vectors[rng.integers(dataset.n)]
            vec = base + (rng.normal(0, noise, dataset.dim).astype(np.float32)
                          if noise > 0 else 0.0)
        else:
            vec = rng.random(dataset.dim, dtype=np.float32)
        if width is not None:
            widths = [width] * len(attrs)
        else:
            widths = rng.uniform(width_range[0], width_range[1],
                                 size=len(attrs))
        preds = _predicates_for(rng, dataset.attributes, attrs, widths)
        queries.append(RangeQuery(vector=np.asarray(vec, np.float32),
                                  predicates=tuple(preds), k=k))
        selectivities[qi] = measured_selectivity(dataset, preds)
    return queries, selectivities
