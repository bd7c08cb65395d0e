"""Cell-batch scheduling for out-of-core execution.

A batch of queries induces a query-by-cell incidence matrix.  Cells are
grouped into capacity-bounded batches; a query is active in every batch that
contains at least one of its cells, and each activation costs state hand-off,
so the planner minimizes the summed active-query counts.  The greedy planner
places each cell into the open batch where it wakes the fewest new queries;
the exact planner enumerates every capacity-bounded partition and is a test
oracle for small instances.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .search import SearchParams, plan_cells


@dataclass
class IncidenceMatrix:
    """matrix[i, j] is 1 when query i needs cell j."""

    matrix: np.ndarray  # (num_queries, num_cells) uint8

    @property
    def num_queries(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_cells(self) -> int:
        return self.matrix.shape[1]

    def query_cells(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.matrix[i]).astype(np.int32)

    def requested_cells(self) -> np.ndarray:
        """Cells needed by at least one query, ascending."""
        return np.flatnonzero(self.matrix.any(axis=0)).astype(np.int32)


def build_incidence(index, queries, params: SearchParams | None = None) -> IncidenceMatrix:
    """One row per query; fallback-path queries get all-ones rows."""
    params = params or SearchParams()
    mat = np.zeros((len(queries), index.num_cells), dtype=np.uint8)
    for i, q in enumerate(queries):
        cells, fallback = plan_cells(index, q, params)
        if fallback:
            mat[i, :] = 1
        else:
            mat[i, cells] = 1
    return IncidenceMatrix(matrix=mat)


def active_count(incidence: IncidenceMatrix, batch_cells) -> int:
    """Queries incident to at least one cell of the batch."""
    cells = np.asarray(batch_cells, dtype=np.int64)
    if len(cells) == 0:
        return 0
    return int(incidence.matrix[:, cells].any(axis=1).sum())


@dataclass
class BatchPlan:
    """Capacity-bounded cell batches plus the queries each batch wakes."""

    batches: list = field(default_factory=list)         # list[np.ndarray int32]
    active_queries: list = field(default_factory=list)  # list[np.ndarray int64]
    total_cost: int = 0
    batch_size: int = 0

    @property
    def num_batches(self) -> int:
        return len(self.batches)

    def to_json(self) -> str:
        return json.dumps({
            "batch_size": self.batch_size,
            "total_cost": self.total_cost,
            "batches": [[int(c) for c in b] for b in self.batches],
            "active_queries": [[int(q) for q in a] for a in self.active_queries],
        }, indent=2)


def _finish_plan(incidence: IncidenceMatrix, batches: list,
                 batch_size: int) -> BatchPlan:
    batches = [np.asarray(b, dtype=np.int32) for b in batches if len(b)]
    active = [np.flatnonzero(incidence.matrix[:, b].any(axis=1))
              for b in batches]
    return BatchPlan(batches=batches, active_queries=active,
                     total_cost=int(sum(len(a) for a in active)),
                     batch_size=batch_size)


def schedule_greedy(incidence: IncidenceMatrix, cells, batch_size: int) -> BatchPlan:
    """Assign each cell, in the given order, to the open batch that wakes the
    fewest new queries; ties prefer the batch with fewer active queries, then
    the lower batch index.  Returns the in-order packing instead whenever
    that baseline is strictly cheaper, so the result never costs more than
    not scheduling at all."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    cells = np.asarray(cells, dtype=np.int64)
    n_batches = math.ceil(len(cells) / batch_size)
    members: list[list[int]] = [[] for _ in range(n_batches)]
    woken: list[set] = [set() for _ in range(n_batches)]
    for cell in cells:
        needed = set(np.flatnonzero(incidence.matrix[:, cell]).tolist())
        best, best_inc, best_act = -1, None, None
        for bi in range(n_batches):
            if len(members[bi]) >= batch_size:
                continue
            inc = len(needed - woken[bi])
            act = len(woken[bi])
            if best == -1 or inc < best_inc or (inc == best_inc and act < best_act):
                best, best_inc, best_act = bi, inc, act
        members[best].append(int(cell))
        woken[best] |= needed
    plan = _finish_plan(incidence, members, batch_size)
    # per-cell commitment can occasionally lose to plain chunking; keep the
    # in-order plan as a floor so the heuristic never returns a worse one
    baseline = pack_in_order(incidence, cells, batch_size)
    return baseline if baseline.total_cost < plan.total_cost else plan


def pack_in_order(incidence: IncidenceMatrix, cells, batch_size: int) -> BatchPlan:
    """Baseline: consecutive cells fill consecutive batches."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    cells = np.asarray(cells, dtype=np.int64)
    members = [cells[i:i + batch_size].tolist()
               for i in range(0, len(cells), batch_size)]
    return _finish_plan(incidence, members, batch_size)


def schedule_exact(incidence: IncidenceMatrix, cells, batch_size: int,
                   max_cells: int = 10) -> BatchPlan:
    """Optimal plan by exhaustive partition enumeration (test oracle).

    Splitting a batch never lowers its summed activations, so only partitions
    into the minimum number of batches need enumeration.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    cells = np.asarray(cells, dtype=np.int64)
    if len(cells) > max_cells:
        raise ValueError(f"exact scheduling is limited to {max_cells} cells, "
                         f"got {len(cells)}")
    n_batches = math.ceil(len(cells) / batch_size)
    query_sets = [frozenset(np.flatnonzero(incidence.matrix[:, c]).tolist())
                  for c in cells]
    best_cost = None
    best_members = None

    def recurse(idx, members, woken, cost):
        nonlocal best_cost, best_members
        if best_cost is not None and cost >= best_cost:
            return
        if idx == len(cells):
            if best_cost is None or cost < best_cost:
                best_cost = cost
                best_members = [list(m) for m in members]
            return
        needed = query_sets[idx]
        opened = len(members)
        for bi in range(opened):
            if len(members[bi]) >= batch_size:
                continue
            extra = len(needed - woken[bi])
            members[bi].append(int(cells[idx]))
            prev = woken[bi]
            woken[bi] = prev | needed
            recurse(idx + 1, members, woken, cost + extra)
            woken[bi] = prev
            members[bi].pop()
        # new group, canonical order: only the next unused slot
        if opened < n_batches:
            members.append([int(cells[idx])])
            woken.append(set(needed))
            recurse(idx + 1, members, woken, cost + len(needed))
            members.pop()
            woken.pop()

    if len(cells) == 0:
        return _finish_plan(incidence, [], batch_size)
    recurse(0, [], [], 0)
    return _finish_plan(incidence, best_members, batch_size)


def load_incidence(path: str) -> IncidenceMatrix:
    """Read an incidence matrix from .json ({"matrix": [[...]]}) or 0/1 CSV."""
    if path.endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        return IncidenceMatrix(matrix=np.asarray(data["matrix"], dtype=np.uint8))
    mat = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    return IncidenceMatrix(matrix=mat.astype(np.uint8))


def save_incidence(incidence: IncidenceMatrix, path: str) -> None:
    if path.endswith(".json"):
        with open(path, "w") as fh:
            json.dump({"matrix": incidence.matrix.astype(int).tolist()}, fh)
    else:
        np.savetxt(path, incidence.matrix.astype(np.int64), fmt="%d",
                   delimiter=",")
