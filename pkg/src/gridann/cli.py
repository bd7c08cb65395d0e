"""Command-line front end.

Subcommands: build, query, bench, schedule, oracle, advise-cells, gen-data,
gen-queries.  Every option can also come from a TOML or JSON config file via
--config: the file holds flag names with dashes as underscores, either flat
or nested under the subcommand name, and explicit command-line values win.
Outputs are CSV or JSON lines only.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io as gio
from .advisor import advise_cell_count
from .bench import BenchConfig, bench_run, compute_oracles, rows_to_csv
from .core import Dataset
from .datagen import generate_queries, make_clustered_dataset, make_uniform_dataset
from .index import BuildParams, build_index
from .oracle import brute_force_search
from .schedule import load_incidence, pack_in_order, schedule_exact, schedule_greedy
from .search import SearchParams, search_batch
from .storage import load_index, save_index
from .streaming import StreamBudget, run_out_of_core


def _merge_config(args: argparse.Namespace, command: str) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    cfg = gio.load_config(args.config)
    scoped = cfg.get(command, {}) if isinstance(cfg.get(command, {}), dict) else {}
    flat = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    merged = {**flat, **scoped}
    for key, value in merged.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    return args


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise SystemExit(f"missing required option(s): {flags}")


def _out(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_dataset(vectors_path: str, attributes_path: str | None) -> Dataset:
    vectors = gio.load_fvecs(vectors_path)
    attributes = (gio.load_attributes_csv(attributes_path)
                  if attributes_path else None)
    return Dataset(vectors=vectors, attributes=attributes)


def _search_params(args) -> SearchParams:
    return SearchParams(
        k=args.k,
        beam=args.beam if args.beam is not None else 64,
        s_thre=args.s_thre,
        rng_seed=args.seed if args.seed is not None else 0,
        use_ordering=not args.no_order,
        use_inter_seeding=not args.no_inter_seed)


def _cmd_build(args) -> int:
    _require(args, "vectors", "attributes", "out")
    dataset = _load_dataset(args.vectors, args.attributes)
    params = BuildParams(
        num_cells=args.cells if args.cells is not None else 16,
        num_partition_attrs=args.partition_attrs,
        intra_degree=args.degree if args.degree is not None else 16,
        inter_degree=args.inter_degree if args.inter_degree is not None else 2,
        ef_construction=args.ef if args.ef is not None else 100,
        num_clusters=args.clusters if args.clusters is not None else 256,
        top_m=args.top_m if args.top_m is not None else 8,
        rng_seed=args.seed if args.seed is not None else 0)
    index = build_index(dataset, params)
    save_index(index, args.out)
    print(json.dumps({"records": index.n, "dim": index.dim,
                      "cells": index.num_cells, "file": args.out}))
    return 0


def _cmd_query(args) -> int:
    _require(args, "index", "vectors", "queries")
    index = load_index(args.index)
    index.attach_vectors(gio.load_fvecs(args.vectors))
    queries = gio.load_queries_jsonl(args.queries)
    params = _search_params(args)
    results = search_batch(index, queries, params, workers=args.workers)
    lines = []
    for i, r in enumerate(results):
        lines.append(json.dumps({
            "query": i,
            "ids": [int(x) for x in r.ids],
            "distances": [float(d) for d in r.distances]}))
    _out("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_bench(args) -> int:
    _require(args, "index", "vectors", "queries")
    index = load_index(args.index)
    vectors = gio.load_fvecs(args.vectors)
    index.attach_vectors(vectors)
    queries = gio.load_queries_jsonl(args.queries)
    if args.out_of_core:
        budget = StreamBudget(
            memory_cap=args.memory_cap if args.memory_cap is not None else 1 << 62,
            bandwidth_model=(float(args.bandwidth)
                             if args.bandwidth is not None else None),
            stage_depth=args.stage_depth if args.stage_depth is not None else 2)
        stream = run_out_of_core(
            args.index, queries, _search_params(args), budget,
            vectors=vectors,
            batch_size=args.batch_size if args.batch_size is not None else 4)
        _out(stream.timeline_csv(), args.out)
        return 0
    k = args.k if args.k is not None else 10
    beams = ([int(b) for b in str(args.beams).split(",")]
             if args.beams is not None else [16, 32, 64, 128, 256])
    dataset = Dataset(vectors=vectors, attributes=index.attributes)
    oracles = compute_oracles(dataset, queries, k)
    config = BenchConfig(k=k, beams=tuple(beams),
                         params=_search_params(args),
                         simulated=bool(args.simulated))
    rows = bench_run(index, queries, oracles, config)
    _out(rows_to_csv(rows), args.out)
    return 0


def _cmd_schedule(args) -> int:
    _require(args, "incidence", "batch_size")
    incidence = load_incidence(args.incidence)
    cells = incidence.requested_cells()
    if args.exact:
        plan = schedule_exact(incidence, cells, args.batch_size)
    else:
        plan = schedule_greedy(incidence, cells, args.batch_size)
    naive = pack_in_order(incidence, cells, args.batch_size)
    payload = json.loads(plan.to_json())
    payload["naive_cost"] = naive.total_cost
    _out(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


def _cmd_oracle(args) -> int:
    _require(args, "vectors", "attributes", "queries")
    dataset = _load_dataset(args.vectors, args.attributes)
    queries = gio.load_queries_jsonl(args.queries)
    lines = []
    for i, q in enumerate(queries):
        ids, dists = brute_force_search(dataset, q, args.k)
        lines.append(json.dumps({
            "query": i,
            "ids": [int(x) for x in ids],
            "distances": [float(d) for d in dists]}))
    _out("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_advise_cells(args) -> int:
    _require(args, "n", "sigma")
    advice = advise_cell_count(int(args.n), float(args.sigma),
                               float(args.alpha) if args.alpha is not None else 0.5)
    payload = {"recommended": advice.recommended, "theta": advice.theta,
               "closed_form": advice.closed_form}
    _out(json.dumps(payload) + "\n", args.out)
    if args.curve_out:
        lines = ["s,t"]
        lines += [f"{s},{t:.9f}" for s, t in
                  zip(advice.s_values, advice.t_values)]
        with open(args.curve_out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _cmd_gen_data(args) -> int:
    _require(args, "n", "dim", "attrs", "out", "attributes_out")
    seed = args.seed if args.seed is not None else 0
    if args.clustered:
        dataset = make_clustered_dataset(
            int(args.n), int(args.dim), int(args.attrs),
            num_clusters=args.clusters if args.clusters is not None else 8,
            seed=seed)
    else:
        dataset = make_uniform_dataset(int(args.n), int(args.dim),
                                       int(args.attrs), seed=seed)
    gio.save_fvecs(args.out, dataset.vectors)
    gio.save_attributes_csv(args.attributes_out, dataset.attributes)
    print(json.dumps({"records": dataset.n, "vectors": args.out,
                      "attributes": args.attributes_out}))
    return 0


def _cmd_gen_queries(args) -> int:
    _require(args, "vectors", "attributes", "count", "out")
    dataset = _load_dataset(args.vectors, args.attributes)
    width_range = ((float(args.width_lo), float(args.width_hi))
                   if args.width_lo is not None else (0.01, 1.0))
    queries, selectivities = generate_queries(
        dataset, int(args.count),
        k=args.k if args.k is not None else 10,
        width=float(args.width) if args.width is not None else None,
        width_range=width_range,
        seed=args.seed if args.seed is not None else 0)
    gio.save_queries_jsonl(args.out, queries)
    meta = {"count": len(queries),
            "mean_selectivity": float(selectivities.mean()),
            "selectivities": [float(s) for s in selectivities]}
    if args.meta_out:
        with open(args.meta_out, "w") as fh:
            json.dump(meta, fh)
    print(json.dumps({"count": len(queries), "file": args.out,
                      "mean_selectivity": meta["mean_selectivity"]}))
    return 0


def _add_common(sp):
    sp.add_argument("--config", help="TOML or JSON config file")
    sp.add_argument("--out", help="output file (default stdout)")
    sp.add_argument("--seed", type=int)


def _add_search_flags(sp):
    sp.add_argument("--k", type=int)
    sp.add_argument("--beam", type=int)
    sp.add_argument("--s-thre", dest="s_thre", type=int)
    sp.add_argument("--no-order", action="store_true")
    sp.add_argument("--no-inter-seed", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gridann",
        description="grid-partitioned graph index for range-filtered "
                    "vector search")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("build", help="build and save an index")
    sp.add_argument("--vectors")
    sp.add_argument("--attributes")
    sp.add_argument("--cells", type=int)
    sp.add_argument("--partition-attrs", dest="partition_attrs", type=int)
    sp.add_argument("--degree", type=int)
    sp.add_argument("--inter-degree", dest="inter_degree", type=int)
    sp.add_argument("--ef", type=int)
    sp.add_argument("--clusters", type=int)
    sp.add_argument("--top-m", dest="top_m", type=int)
    _add_common(sp)
    sp.set_defaults(func=_cmd_build)

    sp = sub.add_parser("query", help="run filtered searches")
    sp.add_argument("--index")
    sp.add_argument("--vectors")
    sp.add_argument("--queries")
    sp.add_argument("--workers", type=int, default=1)
    _add_search_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=_cmd_query)

    sp = sub.add_parser("bench", help="recall/QPS sweep or streaming timeline")
    sp.add_argument("--index")
    sp.add_argument("--vectors")
    sp.add_argument("--queries")
    sp.add_argument("--beams")
    sp.add_argument("--simulated", action="store_true")
    sp.add_argument("--out-of-core", dest="out_of_core", action="store_true")
    sp.add_argument("--memory-cap", dest="memory_cap", type=int)
    sp.add_argument("--stage-depth", dest="stage_depth", type=int)
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--bandwidth", type=float,
                    help="bytes/sec; enables the simulated clock")
    _add_search_flags(sp)
    _add_common(sp)
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("schedule", help="plan cell batches from an incidence matrix")
    sp.add_argument("--incidence")
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--exact", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=_cmd_schedule)

    sp = sub.add_parser("oracle", help="exact brute-force ground truth")
    sp.add_argument("--vectors")
    sp.add_argument("--attributes")
    sp.add_argument("--queries")
    sp.add_argument("--k", type=int)
    _add_common(sp)
    sp.set_defaults(func=_cmd_oracle)

    sp = sub.add_parser("advise-cells", help="cost-model cell count advisor")
    sp.add_argument("--n", type=int)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--curve-out", dest="curve_out")
    _add_common(sp)
    sp.set_defaults(func=_cmd_advise_cells)

    sp = sub.add_parser("gen-data", help="synthesize vectors and attributes")
    sp.add_argument("--n", type=int)
    sp.add_argument("--dim", type=int)
    sp.add_argument("--attrs", type=int)
    sp.add_argument("--clustered", action="store_true")
    sp.add_argument("--clusters", type=int)
    sp.add_argument("--attributes-out", dest="attributes_out")
    _add_common(sp)
    sp.set_defaults(func=_cmd_gen_data)

    sp = sub.add_parser("gen-queries", help="synthesize filtered queries")
    sp.add_argument("--vectors")
    sp.add_argument("--attributes")
    sp.add_argument("--count", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--width", type=float)
    sp.add_argument("--width-lo", dest="width_lo", type=float)
    sp.add_argument("--width-hi", dest="width_hi", type=float)
    sp.add_argument("--meta-out", dest="meta_out")
    _add_common(sp)
    sp.set_defaults(func=_cmd_gen_queries)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    args = _merge_config(args, args.command)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
