"""Out-of-core batch execution of filtered searches.

The graph topology dominates index size, so it stays on disk: cells are
grouped into capacity-bounded batches (see :mod:`.schedule`), and a three
stage pipeline streams them through memory.  While the compute stage walks
batch t for its active queries, the loader assembles the partial index for
batch t+1 and the rerank stage re-scores the candidates batch t-1 emitted.
Per-query search state persists across batches, and within a batch each query
visits its cells in the same order the in-memory engine would use, which is
what makes streamed results match in-memory results when the plan preserves
each query's cell order.

Two clocks are supported.  Real mode runs loader and rerank on their own
threads with bounded hand-off and records wall-clock spans.  Simulated mode
runs the same work sequentially and derives the timeline from a fixed cost
model (bytes over bandwidth for loads, per-activation plus per-evaluation for
compute, per-candidate for rerank) under the bounded-lookahead recurrence, so
CI can assert overlap and pipelining gains deterministically.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .histogram import estimate_cardinalities, order_cells
from .index import GridGraphIndex, InterCellEdges
from .schedule import BatchPlan, IncidenceMatrix, build_incidence, schedule_greedy
from .search import (QueryContext, SearchParams, SearchResult, SearchState,
                     Workspace, finalize_result, make_context, plan_cells,
                     run_cell_sequence, search)
from .storage import IndexReader, load_index


@dataclass(frozen=True)
class CostModel:
    """Deterministic clock for simulated runs (documented constants)."""

    bytes_per_second: float = float(1 << 30)  # streaming bandwidth
    activation_seconds: float = 2e-5          # per (query, batch) wake-up
    eval_seconds: float = 5e-8                # per code-distance evaluation
    rerank_seconds: float = 2e-7              # per re-scored candidate

    def load_ns(self, nbytes: int) -> int:
        return max(1, int(round(nbytes / self.bytes_per_second * 1e9)))

    def compute_ns(self, activations: int, evals: int) -> int:
        return max(1, int(round((activations * self.activation_seconds +
                                 evals * self.eval_seconds) * 1e9)))

    def rerank_ns(self, candidates: int) -> int:
        return max(1, int(round(candidates * self.rerank_seconds * 1e9)))


@dataclass(frozen=True)
class StreamBudget:
    """Memory cap per staged batch, optional simulated clock, lookahead depth."""

    memory_cap: int = 1 << 62
    bandwidth_model: CostModel | float | None = None
    stage_depth: int = 2

    def __post_init__(self):
        if self.memory_cap < 1:
            raise ValueError("memory_cap must be positive")
        if self.stage_depth < 1:
            raise ValueError("stage_depth must be >= 1")

    def cost_model(self) -> CostModel | None:
        if self.bandwidth_model is None:
            return None
        if isinstance(self.bandwidth_model, CostModel):
            return self.bandwidth_model
        return CostModel(bytes_per_second=float(self.bandwidth_model))


@dataclass
class PartialIndex:
    """One batch's slice of the on-disk graph: intra adjacency of the batch
    cells, inter edges with both endpoints inside the batch, and the
    member-id tables that map local slots back to global record ids."""

    batch_index: int
    cells: np.ndarray                  # (nb,) int32
    adjacency: dict                    # cell -> (size, width) int32
    inter: dict                        # cell -> (size, nb, l) int32
    members: dict                      # cell -> (size,) int32
    nbytes: int = 0


def assemble_partial_index(reader: IndexReader, batch_cells,
                           members_of, memory_cap: int,
                           batch_index: int = 0) -> PartialIndex:
    """Read one batch's sections from disk; hard error when over the cap."""
    cells = np.asarray(batch_cells, dtype=np.int32)
    inter_map = reader.memmap("inter/edges")
    adjacency, inter, members = {}, {}, {}
    nbytes = cells.nbytes
    for c in cells.tolist():
        adj = reader.cell_adjacency(c)
        mem = np.asarray(members_of(c), dtype=np.int32)
        sliced = np.array(inter_map[mem][:, cells, :]) if len(mem) else \
            np.empty((0, len(cells), reader.inter_degree), np.int32)
        adjacency[c] = adj
        members[c] = mem
        inter[c] = sliced
        nbytes += adj.nbytes + mem.nbytes + sliced.nbytes
    if nbytes > memory_cap:
        raise ValueError(
            f"batch {batch_index} (cells {cells.tolist()}) needs {nbytes} "
            f"bytes, exceeding the {memory_cap} byte memory cap")
    return PartialIndex(batch_index=batch_index, cells=cells,
                        adjacency=adjacency, inter=inter, members=members,
                        nbytes=nbytes)


class PartialGraphView:
    """Traversal view over one staged batch; same surface as the in-memory
    view, but inter edges resolve only within the batch."""

    def __init__(self, index: GridGraphIndex, blob: PartialIndex):
        self.index = index
        self.blob = blob
        self._pos = {int(c): i for i, c in enumerate(blob.cells)}

    def members(self, cell: int) -> np.ndarray:
        return self.blob.members[cell]

    def adjacency(self, cell: int) -> np.ndarray:
        return self.blob.adjacency[cell]

    def inter_targets(self, node_ids: np.ndarray, cell: int) -> np.ndarray:
        pos = self._pos[int(cell)]
        cell_of = self.index.assignment.cell_of
        rank = self.index.assignment.member_rank
        out = []
        for nid in np.asarray(node_ids).tolist():
            rows = self.blob.inter.get(int(cell_of[nid]))
            if rows is None:
                continue
            row = rows[rank[nid], pos]
            out.extend(row[row >= 0].tolist())
        return np.asarray(out, dtype=np.int32)


@dataclass(frozen=True)
class TimelineSpan:
    stage: str   # "load" | "compute" | "rerank"
    batch: int
    start_ns: int
    end_ns: int


def timeline_csv(spans) -> str:
    lines = ["stage,batch,start_ns,end_ns"]
    for s in spans:
        lines.append(f"{s.stage},{s.batch},{s.start_ns},{s.end_ns}")
    return "\n".join(lines) + "\n"


def wall_clock_ns(spans) -> int:
    """End of the last span minus start of the first (0 when empty)."""
    spans = list(spans)
    if not spans:
        return 0
    return max(s.end_ns for s in spans) - min(s.start_ns for s in spans)


@dataclass
class StreamResult:
    results: list                      # list[SearchResult], query order
    timeline: list                     # list[TimelineSpan]
    plan: BatchPlan
    incidence: IncidenceMatrix
    peak_resident_bytes: int = 0
    reranked_candidates: int = 0
    mode: str = "real"

    def timeline_csv(self) -> str:
        return timeline_csv(self.timeline)

    def wall_clock_ns(self) -> int:
        return wall_clock_ns(self.timeline)


@dataclass
class _QueryRun:
    """Mutable per-query pipeline state."""

    ctx: QueryContext
    state: SearchState
    order: np.ndarray         # full cell visit order
    fallback: bool
    known: set = field(default_factory=set)
    exact: dict = field(default_factory=dict)  # id -> reranked distance
    result: SearchResult | None = None


def _load_resident(reader: IndexReader, vectors: np.ndarray) -> GridGraphIndex:
    """Everything except the streamed graph topology, via the full loader,
    with the heavyweight edge sections dropped."""
    index = load_index(reader.path)
    index.intra = []
    index.inter = InterCellEdges(edges=np.empty(
        (0, reader.num_cells, reader.inter_degree), np.int32))
    index.attach_vectors(vectors)
    return index


def _plan_query(index: GridGraphIndex, query, params: SearchParams):
    """(ordered cells, fallback flag); fallback orders the full cell set."""
    cells, fallback = plan_cells(index, query, params)
    if fallback and len(cells) > 1 and params.use_ordering:
        cards = estimate_cardinalities(index.histogram, query.vector, cells)
        cells = order_cells(cells, cards)
    return cells, fallback


def _compute_batch(resident, blob, runs, active, ws, get_full_index,
                   queries, params):
    """Walk one staged batch for every active query.

    Returns (emitted rerank units, activations, distance evals).  Fallback
    queries run the true whole-graph search only when this single batch holds
    every cell; otherwise they degrade to the sequential path over the
    batch's slice of their ordered cells.
    """
    view = PartialGraphView(resident, blob)
    whole_graph = len(blob.cells) == resident.num_cells
    emitted = []
    activations = 0
    evals = 0
    for qi in np.asarray(active).tolist():
        run = runs[qi]
        if run.fallback and whole_graph:
            run.result = search(get_full_index(), queries[qi], params)
            activations += 1
            evals += run.result.num_distance_evals
            continue
        sub = run.order[np.isin(run.order, blob.cells)]
        if len(sub) == 0:
            continue
        activations += 1
        before = int(run.state.counters[3])
        epoch = ws.next_epoch()
        run_cell_sequence(view, resident, run.ctx, run.state, sub, ws, epoch)
        evals += int(run.state.counters[3]) - before
        fresh = [int(i) for i in run.state.candidate_ids().tolist()
                 if int(i) not in run.known]
        if fresh:
            fresh.sort()
            run.known.update(fresh)
            emitted.append((qi, np.asarray(fresh, dtype=np.int64)))
    return emitted, activations, evals


def _rerank_units(vectors: np.ndarray, runs, units) -> int:
    """Exact float64 re-scoring of freshly emitted candidates."""
    count = 0
    for qi, ids in units:
        run = runs[qi]
        q = run.ctx.vector.astype(np.float64)
        diffs = vectors[ids].astype(np.float64) - q
        dists = (diffs * diffs).sum(axis=1)
        for i, d in zip(ids.tolist(), dists.tolist()):
            run.exact[i] = d
        count += len(ids)
    return count


def _window_peak(byte_sizes, depth: int) -> int:
    peak = 0
    for t in range(len(byte_sizes)):
        peak = max(peak, sum(byte_sizes[t:t + depth]))
    return peak


def run_out_of_core(index_path: str, queries, params: SearchParams | None = None,
                    budget: StreamBudget | None = None, *,
                    vectors: np.ndarray,
                    batch_size: int,
                    plan: BatchPlan | None = None) -> StreamResult:
    """Execute a query batch against an on-disk index under a memory budget.

    vectors are the original float vectors (the file stores only codes);
    batch_size bounds the cells staged together.  A precomputed plan
    overrides the built-in greedy scheduling.
    """
    params = params or SearchParams()
    budget = budget or StreamBudget()
    reader = IndexReader(index_path)
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.shape != (reader.n, reader.dim):
        raise ValueError(f"vectors shape {vectors.shape} does not match the "
                         f"index ({reader.n}, {reader.dim})")
    resident = _load_resident(reader, vectors)
    incidence = build_incidence(resident, queries, params)
    if plan is None:
        plan = schedule_greedy(incidence, incidence.requested_cells(), batch_size)
    runs = []
    for q in queries:
        ctx = make_context(resident, q, params)
        cells, fallback = _plan_query(resident, q, params)
        runs.append(_QueryRun(ctx=ctx,
                              state=SearchState.allocate(ctx.k, params.beam),
                              order=np.asarray(cells, dtype=np.int32),
                              fallback=fallback))
    ws = Workspace.for_size(reader.n)
    full_index_box: list = [None]

    def get_full_index() -> GridGraphIndex:
        if full_index_box[0] is None:
            full = load_index(index_path)
            full.attach_vectors(vectors)
            full_index_box[0] = full
        return full_index_box[0]

    blob_bytes: dict = {}

    def load(t):
        blob = assemble_partial_index(reader, plan.batches[t],
                                      resident.assignment.members,
                                      budget.memory_cap, t)
        blob_bytes[t] = blob.nbytes
        return blob

    def compute(t, blob):
        return _compute_batch(resident, blob, runs, plan.active_queries[t],
                              ws, get_full_index, queries, params)

    def rerank(units):
        return _rerank_units(vectors, runs, units)

    model = budget.cost_model()
    if model is None:
        spans, reranked = _run_real(plan, budget, load, compute, rerank)
        mode = "real"
    else:
        spans, reranked = _run_simulated(plan, budget, model,
                                         load, compute, rerank)
        mode = "simulated"
    results = []
    for run in runs:
        if run.result is not None:
            results.append(run.result)
        elif len(run.order) == 0:
            results.append(SearchResult(ids=np.empty(0, np.int64),
                                        distances=np.empty(0, np.float64)))
        else:
            results.append(finalize_result(resident, run.ctx, run.state,
                                           run.order, used_fallback=run.fallback))
    sizes = [blob_bytes[t] for t in sorted(blob_bytes)]
    return StreamResult(results=results, timeline=spans, plan=plan,
                        incidence=incidence,
                        peak_resident_bytes=_window_peak(sizes, budget.stage_depth),
                        reranked_candidates=reranked, mode=mode)


def _run_real(plan, budget, load, compute, rerank):
    """Threaded pipeline: loader ahead by stage_depth-1, rerank trailing."""
    import queue as qmod
    import threading

    T = plan.num_batches
    spans: list = []
    if T == 0:
        return spans, 0
    if budget.stage_depth == 1 or T == 1:
        reranked = 0
        for t in range(T):
            t0 = time.perf_counter_ns()
            blob = load(t)
            t1 = time.perf_counter_ns()
            spans.append(TimelineSpan("load", t, t0, t1))
            t0 = time.perf_counter_ns()
            units, _, _ = compute(t, blob)
            t1 = time.perf_counter_ns()
            spans.append(TimelineSpan("compute", t, t0, t1))
            t0 = time.perf_counter_ns()
            reranked += rerank(units)
            t1 = time.perf_counter_ns()
            spans.append(TimelineSpan("rerank", t, t0, t1))
        return spans, reranked

    blob_q = qmod.Queue(maxsize=budget.stage_depth - 1)
    rerank_q = qmod.Queue()
    load_spans: list = []
    rerank_spans: list = []
    errors: list = []
    rerank_total = [0]

    def loader():
        try:
            for t in range(T):
                t0 = time.perf_counter_ns()
                blob = load(t)
                t1 = time.perf_counter_ns()
                load_spans.append(TimelineSpan("load", t, t0, t1))
                blob_q.put(blob)
        except Exception as exc:  # surfaced on the main thread
            errors.append(exc)
            blob_q.put(None)

    def reranker():
        while True:
            item = rerank_q.get()
            if item is None:
                return
            t, units = item
            t0 = time.perf_counter_ns()
            rerank_total[0] += rerank(units)
            t1 = time.perf_counter_ns()
            rerank_spans.append(TimelineSpan("rerank", t, t0, t1))

    lt = threading.Thread(target=loader, daemon=True)
    rt = threading.Thread(target=reranker, daemon=True)
    lt.start()
    rt.start()
    for t in range(T):
        blob = blob_q.get()
        if blob is None:
            break
        t0 = time.perf_counter_ns()
        units, _, _ = compute(t, blob)
        t1 = time.perf_counter_ns()
        spans.append(TimelineSpan("compute", t, t0, t1))
        rerank_q.put((t, units))
    rerank_q.put(None)
    lt.join()
    rt.join()
    if errors:
        raise errors[0]
    spans = sorted(load_spans + spans + rerank_spans,
                   key=lambda s: (s.start_ns, s.stage, s.batch))
    return spans, rerank_total[0]


def _run_simulated(plan, budget, model, load, compute, rerank):
    """Sequential execution with a deterministic pipelined timeline.

    The loader may run at most stage_depth batches ahead of compute:
    load_start[t] = max(load_end[t-1], compute_end[t - stage_depth]).
    """
    T = plan.num_batches
    load_d, comp_d, rer_d = [], [], []
    reranked = 0
    for t in range(T):
        blob = load(t)
        load_d.append(model.load_ns(blob.nbytes))
        units, activations, evals = compute(t, blob)
        comp_d.append(model.compute_ns(activations, evals))
        n = rerank(units)
        reranked += n
        rer_d.append(model.rerank_ns(n))
    D = budget.stage_depth
    load_s, load_e = [0] * T, [0] * T
    comp_s, comp_e = [0] * T, [0] * T
    rer_s, rer_e = [0] * T, [0] * T
    for t in range(T):
        prev_load_end = load_e[t - 1] if t > 0 else 0
        gate = comp_e[t - D] if t - D >= 0 else 0
        load_s[t] = max(prev_load_end, gate)
        load_e[t] = load_s[t] + load_d[t]
        comp_s[t] = max(load_e[t], comp_e[t - 1] if t > 0 else 0)
        comp_e[t] = comp_s[t] + comp_d[t]
        rer_s[t] = max(comp_e[t], rer_e[t - 1] if t > 0 else 0)
        rer_e[t] = rer_s[t] + rer_d[t]
    spans = []
    for t in range(T):
        spans.append(TimelineSpan("load", t, load_s[t], load_e[t]))
        spans.append(TimelineSpan("compute", t, comp_s[t], comp_e[t]))
        spans.append(TimelineSpan("rerank", t, rer_s[t], rer_e[t]))
    spans.sort(key=lambda s: (s.start_ns, s.stage, s.batch))
    return spans, reranked
