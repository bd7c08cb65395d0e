"""Cardinality-balanced grid partition over the most selective attributes.

Each chosen attribute is split into quantile segments whose sizes differ by at
most one record; the joint cells are the cross product of the per-attribute
segments, linearized row-major (first partition attribute most significant).
Records tied on a boundary value are placed by sorted position (value, then
id), which keeps the balance guarantee under heavy duplicates.  For
intersection tests each segment carries the actual min/max of its member
values, so a cell can only be pruned when no record inside it can satisfy the
filter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Predicate


def select_partition_attributes(attributes: np.ndarray, p: int) -> np.ndarray:
    """Indexes of the p most selective attributes.

    Selectivity score is distinct-value count divided by n, ranked descending
    with ties broken toward the lower attribute index.
    """
    n, m = attributes.shape
    if not 1 <= p <= m:
        raise ValueError(f"p must be in [1, {m}], got {p}")
    if n == 0:
        raise ValueError("empty attribute matrix")
    scores = np.array([len(np.unique(attributes[:, j])) / n for j in range(m)])
    order = np.lexsort((np.arange(m), -scores))
    return np.ascontiguousarray(order[:p].astype(np.int32))


def partition_segment_counts(total_cells: int, p: int) -> list[int]:
    """Factor a cell budget into p per-attribute segment counts.

    Picks the divisor closest to the geometric mean at each step (ties toward
    the larger divisor) and returns the factors sorted descending, so the
    largest count lands on the most selective attribute.
    """
    if total_cells < 1 or p < 1:
        raise ValueError("total_cells and p must be positive")
    factors = []
    rest = total_cells
    for slots in range(p, 0, -1):
        if slots == 1:
            factors.append(rest)
            break
        target = rest ** (1.0 / slots)
        best = 1
        for d in range(1, rest + 1):
            if rest % d == 0 and abs(d - target) <= abs(best - target):
                if abs(d - target) < abs(best - target) or d > best:
                    best = d
        factors.append(best)
        rest //= best
    return sorted(factors, reverse=True)


@dataclass
class GridSpec:
    """Partition attributes, per-attribute segment counts and value ranges."""

    attrs: np.ndarray       # (p,) int32 attribute indexes, most selective first
    segments: np.ndarray    # (p,) int32 segment counts
    boundaries: list        # per attribute: (S_i - 1,) float64 advisory split values
    seg_lo: list            # per attribute: (S_i,) float64 actual segment minima
    seg_hi: list            # per attribute: (S_i,) float64 actual segment maxima

    @property
    def p(self) -> int:
        return len(self.attrs)

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.segments))

    def cell_coords(self, cell_id: int) -> tuple[int, ...]:
        coords = []
        rest = cell_id
        for s in self.segments[::-1]:
            coords.append(rest % int(s))
            rest //= int(s)
        return tuple(coords[::-1])

    def cell_id(self, coords: Sequence[int]) -> int:
        cid = 0
        for c, s in zip(coords, self.segments):
            cid = cid * int(s) + int(c)
        return cid


def _cut_positions(n: int, s: int) -> np.ndarray:
    """Quantile cut positions ceil(j * n / s) for j = 0..s."""
    return np.array([int(np.ceil(j * n / s)) for j in range(s + 1)], dtype=np.int64)


def build_grid(attributes: np.ndarray, partition_attrs: Sequence[int],
               segment_counts: Sequence[int]) -> GridSpec:
    """Quantile grid over the given attributes.

    Marginal segment cardinalities differ by at most one by construction of
    the ceiling cut positions.
    """
    attrs = np.asarray(partition_attrs, dtype=np.int32)
    segs = np.asarray(segment_counts, dtype=np.int32)
    if attrs.ndim != 1 or segs.shape != attrs.shape:
        raise ValueError("partition_attrs and segment_counts must be 1-d and "
                         "the same length")
    if len(set(attrs.tolist())) != len(attrs):
        raise ValueError("duplicate partition attribute")
    n = attributes.shape[0]
    if n == 0:
        raise ValueError("empty attribute matrix")
    boundaries, seg_lo, seg_hi = [], [], []
    for a, s in zip(attrs, segs):
        s = int(s)
        if s < 1:
            raise ValueError(f"segment count must be >= 1, got {s}")
        col = attributes[:, a]
        order = np.lexsort((np.arange(n), col))  # (value, id)
        sorted_col = col[order]
        cuts = _cut_positions(n, s)
        bnd = np.empty(s - 1, dtype=np.float64)
        lo = np.full(s, np.nan)
        hi = np.full(s, np.nan)
        for j in range(s):
            a0, a1 = cuts[j], cuts[j + 1]
            if a1 > a0:
                lo[j] = sorted_col[a0]
                hi[j] = sorted_col[a1 - 1]
        for j in range(1, s):
            bnd[j - 1] = sorted_col[cuts[j] - 1] if cuts[j] > 0 else sorted_col[0]
        boundaries.append(bnd)
        seg_lo.append(lo)
        seg_hi.append(hi)
    return GridSpec(attrs=attrs, segments=segs, boundaries=boundaries,
                    seg_lo=seg_lo, seg_hi=seg_hi)


@dataclass
class CellAssignment:
    """Record-to-cell mapping with per-cell member lists in CSR form."""

    cell_of: np.ndarray        # (n,) int32
    member_rank: np.ndarray    # (n,) int32 rank of each record inside its cell
    members_flat: np.ndarray   # (n,) int32 record ids grouped by cell, ascending
    members_start: np.ndarray  # (num_cells + 1,) int64 CSR offsets
    cell_bounds: np.ndarray    # (num_cells, p, 2) float64, NaN rows for empty cells

    @property
    def num_cells(self) -> int:
        return len(self.members_start) - 1

    def members(self, cell_id: int) -> np.ndarray:
        return self.members_flat[self.members_start[cell_id]:
                                 self.members_start[cell_id + 1]]

    def cell_sizes(self) -> np.ndarray:
        return np.diff(self.members_start).astype(np.int64)


def assign_cells(attributes: np.ndarray, grid: GridSpec) -> CellAssignment:
    """Place every record into its joint cell.

    Per-attribute segment membership is positional in the (value, id) sort,
    re-deriving the same cuts as build_grid, so assignment is deterministic
    and balanced even when duplicates straddle a boundary.
    """
    n = attributes.shape[0]
    seg_idx = np.empty((grid.p, n), dtype=np.int64)
    for t, (a, s) in enumerate(zip(grid.attrs, grid.segments)):
        col = attributes[:, a]
        order = np.lexsort((np.arange(n), col))
        cuts = _cut_positions(n, int(s))
        idx = np.empty(n, dtype=np.int64)
        for j in range(int(s)):
            idx[order[cuts[j]:cuts[j + 1]]] = j
        seg_idx[t] = idx
    cell_of = np.zeros(n, dtype=np.int64)
    for t in range(grid.p):
        cell_of = cell_of * int(grid.segments[t]) + seg_idx[t]
    cell_of = cell_of.astype(np.int32)

    num_cells = grid.num_cells
    order = np.lexsort((np.arange(n), cell_of))
    members_flat = np.ascontiguousarray(order.astype(np.int32))
    sizes = np.bincount(cell_of, minlength=num_cells)
    members_start = np.zeros(num_cells + 1, dtype=np.int64)
    np.cumsum(sizes, out=members_start[1:])
    member_rank = np.empty(n, dtype=np.int32)
    for c in range(num_cells):
        ids = members_flat[members_start[c]:members_start[c + 1]]
        member_rank[ids] = np.arange(len(ids), dtype=np.int32)

    bounds = np.full((num_cells, grid.p, 2), np.nan)
    for cid in range(num_cells):
        if sizes[cid] == 0:
            continue
        coords = grid.cell_coords(cid)
        for t, j in enumerate(coords):
            bounds[cid, t, 0] = grid.seg_lo[t][j]
            bounds[cid, t, 1] = grid.seg_hi[t][j]
    return CellAssignment(cell_of=cell_of, member_rank=member_rank,
                          members_flat=members_flat,
                          members_start=members_start, cell_bounds=bounds)


def cells_intersecting(grid: GridSpec, assignment: CellAssignment,
                       predicates: Sequence[Predicate]) -> np.ndarray:
    """Ascending ids of non-empty cells whose bounds intersect every predicate.

    Predicates on non-partitioned attributes cannot prune cells.  With no
    predicates, all non-empty cells qualify.  Any record satisfying the
    filter lies inside one of the returned cells, because segment bounds
    cover their members' actual values.
    """
    attr_pos = {int(a): t for t, a in enumerate(grid.attrs)}
    seg_masks = [np.ones(int(s), dtype=bool) for s in grid.segments]
    for p in predicates:
        t = attr_pos.get(p.attr)
        if t is None:
            continue
        lo = grid.seg_lo[t]
        hi = grid.seg_hi[t]
        with np.errstate(invalid="ignore"):
            seg_masks[t] &= (hi >= p.low) & (lo <= p.high)
    mask = np.ones(1, dtype=bool)
    for t in range(grid.p):
        mask = np.outer(mask, seg_masks[t]).ravel()
    nonempty = np.diff(assignment.members_start) > 0
    return np.flatnonzero(mask & nonempty).astype(np.int32)
