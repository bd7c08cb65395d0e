"""Core data model: records, range queries, metrics, filter predicates.

A dataset is columnar (float32 vectors, float64 attributes); records are
identified by their row index.  A range query combines a query vector, a
conjunction of closed-interval predicates over attribute indexes, and a
result count k.  An empty predicate list degenerates to ordinary nearest
neighbor search.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from ._kernels import neg_ip_f32, sq_l2_f32


class DistanceMetric(Enum):
    SQUARED_EUCLIDEAN = "sq_l2"
    NEGATIVE_INNER_PRODUCT = "neg_ip"


class Predicate(NamedTuple):
    """Closed interval low <= attribute[attr] <= high."""

    attr: int
    low: float
    high: float


@dataclass(frozen=True)
class VectorRecord:
    """One record: row id, float32 vector, float64 attribute row."""

    id: int
    vector: np.ndarray
    attributes: np.ndarray


@dataclass(frozen=True)
class RangeQuery:
    """Query vector plus a conjunction of attribute range predicates."""

    vector: np.ndarray
    predicates: tuple[Predicate, ...] = ()
    k: int = 10

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vector, dtype=np.float32)
        object.__setattr__(self, "vector", vec)
        preds = tuple(Predicate(int(p[0]), float(p[1]), float(p[2]))
                      for p in self.predicates)
        object.__setattr__(self, "predicates", preds)
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        for p in preds:
            if p.attr < 0:
                raise ValueError(f"negative attribute index {p.attr}")
            if p.low > p.high:
                raise ValueError(f"empty predicate interval on attribute "
                                 f"{p.attr}: [{p.low}, {p.high}]")


@dataclass
class Dataset:
    """Columnar record store: vectors (n, dim) float32, attributes (n, m) float64."""

    vectors: np.ndarray
    attributes: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-d array")
        if self.attributes is None:
            self.attributes = np.empty((len(self.vectors), 0), dtype=np.float64)
        self.attributes = np.ascontiguousarray(self.attributes, dtype=np.float64)
        if self.attributes.ndim != 2:
            raise ValueError("attributes must be a 2-d array")
        if len(self.attributes) != len(self.vectors):
            raise ValueError(
                f"row count mismatch: {len(self.vectors)} vectors vs "
                f"{len(self.attributes)} attribute rows")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("vectors contain non-finite values")
        if not np.all(np.isfinite(self.attributes)):
            raise ValueError("attributes contain non-finite values")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_attributes(self) -> int:
        return self.attributes.shape[1]

    def record(self, i: int) -> VectorRecord:
        return VectorRecord(i, self.vectors[i], self.attributes[i])


def distance(x: np.ndarray, y: np.ndarray,
             metric: DistanceMetric = DistanceMetric.SQUARED_EUCLIDEAN) -> float:
    """Distance between two vectors under the chosen metric.

    Accumulates in float32 with a fixed 8-lane blocking, so the value is
    deterministic run to run on one machine.
    """
    x = np.ascontiguousarray(x, dtype=np.float32)
    y = np.ascontiguousarray(y, dtype=np.float32)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if metric is DistanceMetric.SQUARED_EUCLIDEAN:
        return float(sq_l2_f32(x, y))
    if metric is DistanceMetric.NEGATIVE_INNER_PRODUCT:
        return float(neg_ip_f32(x, y))
    raise ValueError(f"unknown metric {metric!r}")


def satisfies(attributes: np.ndarray, predicates: Sequence[Predicate]) -> bool:
    """True when every closed-interval predicate holds for this attribute row.

    An empty predicate list is vacuously true (vanilla nearest neighbor).
    """
    for p in predicates:
        a = attributes[p[0]]
        if a < p[1] or a > p[2]:
            return False
    return True


def satisfies_mask(attributes: np.ndarray,
                   predicates: Sequence[Predicate]) -> np.ndarray:
    """Vectorized satisfies() over all rows of an (n, m) attribute matrix."""
    mask = np.ones(len(attributes), dtype=bool)
    for p in predicates:
        col = attributes[:, p[0]]
        mask &= (col >= p[1]) & (col <= p[2])
    return mask
