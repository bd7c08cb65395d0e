"""Filtered query execution over the grid-of-graphs index.

A query first prunes the grid to the cells its predicates can touch.  A small
cell set is traversed sequentially, most promising cell first, with one
persistent bounded candidate pool per query: each cell contributes entry
candidates (random members plus inter-cell edges of the best pool entries so
far), is explored best-first over its intra edges, and hands the pool to the
next cell.  Too-large cell sets fall back to one unfiltered best-first pass
over the union of all edges with post-filtering.

Traversal ranks nodes by query-to-code distances; the returned candidates are
re-scored on the original float vectors.  Every step is deterministic for a
fixed seed, so batched execution equals one-by-one execution.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import RangeQuery, satisfies_mask
from .grid import cells_intersecting
from .histogram import estimate_cardinalities, order_cells
from .index import GridGraphIndex, derive_seed

_SEED_ENTRY = 11
_SEED_GLOBAL = 12


@dataclass(frozen=True)
class SearchParams:
    """Query-time knobs.

    beam is the capacity of the per-query candidate pool and the main
    recall/speed knob.  s_thre caps the cell count for the sequential path
    (None means the number of grid cells, which disables the fallback);
    entry_links (None = effective k) pool entries contribute inter edges at
    each cell transition and entry_random (None = intra degree) random members
    seed each cell.  k overrides the per-query result count when set.
    """

    k: int | None = None
    beam: int = 64
    s_thre: int | None = None
    entry_links: int | None = None
    entry_random: int | None = None
    rng_seed: int = 0
    use_ordering: bool = True
    use_inter_seeding: bool = True

    def __post_init__(self):
        if self.beam < 1:
            raise ValueError("beam must be >= 1")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.entry_links is not None and self.entry_links < 1:
            raise ValueError("entry_links must be >= 1")
        if self.entry_random is not None and self.entry_random < 0:
            raise ValueError("entry_random must be >= 0")


@dataclass
class SearchState:
    """Per-query candidate pool, result buffer and recycle pool.

    The arrays persist across cells and across streamed batches; `counters`
    is int64[4] = [pool_size, result_size, recycle_size, distance_evals].
    """

    pool_d: np.ndarray
    pool_i: np.ndarray
    pool_x: np.ndarray
    r_d: np.ndarray
    r_i: np.ndarray
    r_s: np.ndarray
    rec_d: np.ndarray
    rec_i: np.ndarray
    rec_f: np.ndarray
    counters: np.ndarray
    k: int
    beam: int

    @classmethod
    def allocate(cls, k: int, beam: int) -> "SearchState":
        rec_cap = max(beam, k)
        return cls(
            pool_d=np.empty(beam, np.float32),
            pool_i=np.empty(beam, np.int32),
            pool_x=np.empty(beam, np.uint8),
            r_d=np.empty(k, np.float32),
            r_i=np.empty(k, np.int32),
            r_s=np.empty(k, np.uint8),
            rec_d=np.empty(rec_cap, np.float32),
            rec_i=np.empty(rec_cap, np.int32),
            rec_f=np.empty(rec_cap, np.uint8),
            counters=np.zeros(4, np.int64),
            k=k, beam=beam)

    @property
    def num_distance_evals(self) -> int:
        return int(self.counters[3])

    def candidate_ids(self) -> np.ndarray:
        """Current result-buffer and recycle-pool ids (disjoint by design)."""
        return np.concatenate([self.r_i[:self.counters[1]],
                               self.rec_i[:self.counters[2]]])


@dataclass
class Workspace:
    """Reusable epoch-stamped visited marks, one per worker thread."""

    visited: np.ndarray
    epoch: int = 0

    @classmethod
    def for_size(cls, n: int) -> "Workspace":
        return cls(visited=np.zeros(n, np.int32))

    def next_epoch(self) -> int:
        self.epoch += 1
        if self.epoch >= np.iinfo(np.int32).max:
            self.visited[:] = 0
            self.epoch = 1
        return self.epoch


@dataclass
class SearchResult:
    """ids sorted by exact distance (ascending), at most k of them."""

    ids: np.ndarray
    distances: np.ndarray
    num_distance_evals: int = 0
    cells: np.ndarray = field(default_factory=lambda: np.empty(0, np.int32))
    used_fallback: bool = False


@dataclass
class QueryContext:
    """Immutable per-query execution inputs shared by all cells and batches."""

    vector: np.ndarray      # float32
    pred_attr: np.ndarray   # int32
    pred_lo: np.ndarray
    pred_hi: np.ndarray
    k: int
    entry_links: int
    entry_random: int
    seed: int
    use_inter: bool


class IndexGraphView:
    """Adjacency/membership access for in-memory traversal.

    The streaming executor substitutes a partial view with the same surface,
    which is what lets both paths share the traversal code.
    """

    def __init__(self, index: GridGraphIndex):
        self.index = index

    def members(self, cell: int) -> np.ndarray:
        return self.index.assignment.members(cell)

    def adjacency(self, cell: int) -> np.ndarray:
        return self.index.intra[cell].adjacency

    def inter_targets(self, node_ids: np.ndarray, cell: int) -> np.ndarray:
        rows = self.index.inter.edges[node_ids, cell, :]
        return rows[rows >= 0]


def make_context(index: GridGraphIndex, query: RangeQuery,
                 params: SearchParams) -> QueryContext:
    eff_k = params.k if params.k is not None else query.k
    if params.beam < eff_k:
        raise ValueError(f"beam ({params.beam}) must be >= k ({eff_k})")
    preds = query.predicates
    return QueryContext(
        vector=np.ascontiguousarray(query.vector, dtype=np.float32),
        pred_attr=np.array([p.attr for p in preds], dtype=np.int32),
        pred_lo=np.array([p.low for p in preds], dtype=np.float64),
        pred_hi=np.array([p.high for p in preds], dtype=np.float64),
        k=eff_k,
        entry_links=params.entry_links if params.entry_links is not None else eff_k,
        entry_random=(params.entry_random if params.entry_random is not None
                      else index.params.intra_degree),
        seed=params.rng_seed,
        use_inter=params.use_inter_seeding)


def _hash_picks(seed: int, tag: int, count: int, limit: int) -> np.ndarray:
    """count distinct deterministic indexes in [0, limit)."""
    if count >= limit:
        return np.arange(limit, dtype=np.int64)
    picked = []
    seen = set()
    slot = 0
    while len(picked) < count and slot < 8 * count:
        r = derive_seed(seed, _SEED_ENTRY, tag, slot) % limit
        slot += 1
        if r in seen:
            continue
        seen.add(r)
        picked.append(r)
    r = 0
    while len(picked) < count:
        if r not in seen:
            picked.append(r)
            seen.add(r)
        r += 1
    return np.array(picked, dtype=np.int64)


def seed_and_traverse_cell(view, index: GridGraphIndex, ctx: QueryContext,
                           state: SearchState, cell: int,
                           ws: Workspace, epoch: int) -> None:
    """Entry seeding plus best-first expansion of one cell.

    Entry candidates are entry_random random cell members united with the
    inter edges (into this cell) of the entry_links best pool entries; the
    intra-degree nearest of them join the pool and the traversal starts there.
    An empty pool (first cell of the query) degrades to random-only seeding.
    """
    members = view.members(cell)
    if len(members) == 0:
        return
    rand_rows = _hash_picks(ctx.seed, cell, min(ctx.entry_random, len(members)),
                            len(members))
    cand = members[rand_rows]
    if ctx.use_inter and state.counters[0] > 0:
        lead = state.pool_i[:min(ctx.entry_links, int(state.counters[0]))]
        targets = view.inter_targets(lead, cell)
        if len(targets):
            cand = np.concatenate([cand, targets])
    cand = np.unique(cand).astype(np.int32)  # sorted, deduplicated
    cand = cand[ws.visited[cand] != epoch]
    if len(cand) == 0:
        return
    dists = np.empty(len(cand), np.float32)
    _kernels.code_dists_batch(ctx.vector, index.codes, index.codebook.vmin,
                              index.codebook.scale, cand, dists)
    state.counters[3] += len(cand)
    top = np.lexsort((cand, dists))[:index.params.intra_degree]
    entry_ids = np.ascontiguousarray(cand[top])
    entry_dists = np.ascontiguousarray(dists[top])
    _kernels.traverse_cell(
        ctx.vector, index.codes, index.codebook.vmin, index.codebook.scale,
        view.adjacency(cell), index.assignment.member_rank,
        index.assignment.cell_of, cell,
        index.attributes, ctx.pred_attr, ctx.pred_lo, ctx.pred_hi,
        ws.visited, epoch, entry_ids, entry_dists,
        state.pool_d, state.pool_i, state.pool_x,
        state.r_d, state.r_i, state.r_s,
        state.rec_d, state.rec_i, state.rec_f,
        state.counters, state.k)


def run_cell_sequence(view, index: GridGraphIndex, ctx: QueryContext,
                      state: SearchState, cells, ws: Workspace,
                      epoch: int) -> None:
    for cell in cells:
        seed_and_traverse_cell(view, index, ctx, state, int(cell), ws, epoch)


def _exact_rerank(index: GridGraphIndex, ctx: QueryContext,
                  ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if index.vectors is None:
        raise ValueError("original vectors are not attached to the index; "
                         "exact rerank needs them")
    q = ctx.vector.astype(np.float64)
    diffs = index.vectors[ids].astype(np.float64) - q
    exact = (diffs * diffs).sum(axis=1)
    order = np.lexsort((ids, exact))
    return ids[order], exact[order]


def finalize_result(index: GridGraphIndex, ctx: QueryContext,
                    state: SearchState, cells: np.ndarray,
                    used_fallback: bool = False) -> SearchResult:
    """Drop unfiltered results, refill from the recycle pool, rerank exactly."""
    r_n = int(state.counters[1])
    rec_n = int(state.counters[2])
    ids = np.concatenate([state.r_i[:r_n][state.r_s[:r_n] == 1],
                          state.rec_i[:rec_n]])
    dists = np.concatenate([state.r_d[:r_n][state.r_s[:r_n] == 1],
                            state.rec_d[:rec_n]])
    top = np.lexsort((ids, dists))[:ctx.k]
    final_ids, final_d = _exact_rerank(index, ctx, ids[top].astype(np.int64))
    return SearchResult(ids=final_ids.astype(np.int64), distances=final_d,
                        num_distance_evals=state.num_distance_evals,
                        cells=np.asarray(cells, dtype=np.int32),
                        used_fallback=used_fallback)


def global_fallback(index: GridGraphIndex, ctx: QueryContext, beam: int,
                    ws: Workspace, epoch: int) -> SearchResult:
    """Unfiltered best-first over all intra plus inter edges, then post-filter."""
    n = index.n
    entries = _hash_picks(ctx.seed, _SEED_GLOBAL,
                          min(index.params.intra_degree, n), n).astype(np.int32)
    dists = np.empty(len(entries), np.float32)
    _kernels.code_dists_batch(ctx.vector, index.codes, index.codebook.vmin,
                              index.codebook.scale, entries, dists)
    pool_d = np.empty(beam, np.float32)
    pool_i = np.empty(beam, np.int32)
    pool_x = np.empty(beam, np.uint8)
    counters = np.zeros(2, np.int64)
    inter_flat = index.inter.edges.reshape(n, -1)
    _kernels.traverse_global(
        ctx.vector, index.codes, index.codebook.vmin, index.codebook.scale,
        index.intra_padded(), inter_flat, entries, dists,
        ws.visited, epoch, pool_d, pool_i, pool_x, counters)
    size = int(counters[0])
    cand_ids = pool_i[:size]
    cand_d = pool_d[:size]
    keep = satisfies_mask(index.attributes[cand_ids],
                          [(int(a), lo, hi) for a, lo, hi in
                           zip(ctx.pred_attr, ctx.pred_lo, ctx.pred_hi)])
    cand_ids = cand_ids[keep]
    cand_d = cand_d[keep]
    top = np.lexsort((cand_ids, cand_d))[:ctx.k]
    final_ids, final_d = _exact_rerank(index, ctx, cand_ids[top].astype(np.int64))
    evals = int(counters[1]) + len(entries)
    return SearchResult(ids=final_ids.astype(np.int64), distances=final_d,
                        num_distance_evals=evals,
                        cells=np.empty(0, np.int32), used_fallback=True)


def plan_cells(index: GridGraphIndex, query: RangeQuery,
               params: SearchParams) -> tuple[np.ndarray, bool]:
    """(ordered cells, fallback flag) for one query."""
    cq = cells_intersecting(index.grid, index.assignment, query.predicates)
    s_thre = params.s_thre if params.s_thre is not None else index.num_cells
    if not 1 <= s_thre <= index.num_cells + 1:
        raise ValueError(f"s_thre must be in [1, {index.num_cells + 1}]")
    if len(cq) > s_thre:
        return cq, True
    if params.use_ordering and len(cq) > 1:
        cards = estimate_cardinalities(index.histogram, query.vector, cq)
        cq = order_cells(cq, cards)
    return cq, False


def search(index: GridGraphIndex, query: RangeQuery,
           params: SearchParams | None = None,
           workspace: Workspace | None = None) -> SearchResult:
    """Top-k ids among records satisfying the query's range predicates."""
    params = params or SearchParams()
    ctx = make_context(index, query, params)
    ws = workspace or Workspace.for_size(index.n)
    epoch = ws.next_epoch()
    cells, fallback = plan_cells(index, query, params)
    if len(cells) == 0:
        return SearchResult(ids=np.empty(0, np.int64),
                            distances=np.empty(0, np.float64))
    if fallback:
        return global_fallback(index, ctx, params.beam, ws, epoch)
    state = SearchState.allocate(ctx.k, params.beam)
    view = IndexGraphView(index)
    run_cell_sequence(view, index, ctx, state, cells, ws, epoch)
    return finalize_result(index, ctx, state, cells)


def search_batch(index: GridGraphIndex, queries, params: SearchParams | None = None,
                 workers: int | None = None) -> list[SearchResult]:
    """Independent per-query searches; identical to calling search() in a loop."""
    params = params or SearchParams()
    workers = workers if workers is not None else (os.cpu_count() or 1)
    if workers <= 1 or len(queries) <= 1:
        ws = Workspace.for_size(index.n)
        return [search(index, q, params, ws) for q in queries]
    import threading
    local = threading.local()

    def run(q):
        ws = getattr(local, "ws", None)
        if ws is None or len(ws.visited) != index.n:
            ws = Workspace.for_size(index.n)
            local.ws = ws
        return search(index, q, params, ws)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, queries))
