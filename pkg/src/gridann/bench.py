"""Recall/throughput measurement and ablation sweeps.

Two clocks: wall mode times real end-to-end execution (scheduling plus
traversal plus rerank); simulated mode prices each query from its own work
counters with the same fixed cost model the streaming executor uses, making
the emitted CSV byte-reproducible for a fixed seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .oracle import brute_force_search, recall_at_k
from .search import SearchParams, Workspace, search
from .streaming import CostModel


@dataclass(frozen=True)
class BenchRow:
    beam: int
    recall: float
    qps: float
    p50_ms: float
    p99_ms: float

    def csv(self) -> str:
        return (f"{self.beam},{self.recall:.6f},{self.qps:.3f},"
                f"{self.p50_ms:.6f},{self.p99_ms:.6f}")


def rows_to_csv(rows) -> str:
    lines = ["beam,recall,qps,p50_ms,p99_ms"]
    lines += [r.csv() for r in rows]
    return "\n".join(lines) + "\n"


@dataclass
class BenchConfig:
    """One sweep: which queries, which beams, which clock."""

    k: int = 10
    beams: tuple = (16, 32, 64, 128, 256)
    params: SearchParams = field(default_factory=SearchParams)
    simulated: bool = False
    cost_model: CostModel = field(default_factory=CostModel)

    def __post_init__(self):
        if any(b < 1 for b in self.beams):
            raise ValueError("beam values must be >= 1")


def compute_oracles(dataset, queries, k: int):
    """Ground-truth id lists for a query batch."""
    return [brute_force_search(dataset, q, k)[0] for q in queries]


def _simulated_latency_s(result, model: CostModel) -> float:
    return (model.activation_seconds +
            result.num_distance_evals * model.eval_seconds +
            len(result.ids) * model.rerank_seconds)


def bench_run(index, queries, oracles, config: BenchConfig) -> list:
    """One BenchRow per beam value; recall against the supplied oracles."""
    rows = []
    ws = Workspace.for_size(index.n)
    for beam in config.beams:
        params = replace(config.params, beam=int(beam), k=config.k)
        latencies = np.empty(len(queries))
        recalls = np.empty(len(queries))
        t_batch0 = time.perf_counter_ns()
        for i, q in enumerate(queries):
            t0 = time.perf_counter_ns()
            result = search(index, q, params, ws)
            t1 = time.perf_counter_ns()
            if config.simulated:
                latencies[i] = _simulated_latency_s(result, config.cost_model)
            else:
                latencies[i] = (t1 - t0) / 1e9
            recalls[i] = recall_at_k(result.ids, oracles[i], config.k)
        wall_s = (time.perf_counter_ns() - t_batch0) / 1e9
        total_s = float(latencies.sum()) if config.simulated else wall_s
        rows.append(BenchRow(
            beam=int(beam),
            recall=float(recalls.mean()),
            qps=len(queries) / total_s if total_s > 0 else float("inf"),
            p50_ms=float(np.percentile(latencies, 50) * 1e3),
            p99_ms=float(np.percentile(latencies, 99) * 1e3)))
    return rows


ABLATIONS = {
    "full": {},
    "no_ordering": {"use_ordering": False},
    "no_inter_seeding": {"use_inter_seeding": False},
}


def bench_ablations(index, queries, oracles, k: int, beam: int,
                    base: SearchParams | None = None) -> dict:
    """Mean recall per ablation variant at a fixed beam."""
    base = base or SearchParams()
    out = {}
    ws = Workspace.for_size(index.n)
    for name, overrides in ABLATIONS.items():
        params = replace(base, beam=beam, k=k, **overrides)
        recalls = [recall_at_k(search(index, q, params, ws).ids, o, k)
                   for q, o in zip(queries, oracles)]
        out[name] = float(np.mean(recalls))
    return out


def bootstrap_std(values, n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap standard deviation of the mean."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    means = np.empty(n_boot)
    for b in range(n_boot):
        means[b] = values[rng.integers(0, len(values), len(values))].mean()
    return float(means.std())
