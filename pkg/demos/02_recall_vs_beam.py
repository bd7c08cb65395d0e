"""Sweep the traversal beam width and watch recall buy throughput back.

The beam bounds the candidate pool carried across cells, so it is the main
accuracy/speed dial at query time.  This script prints the recall/QPS curve
for a mixed-selectivity workload, in the same CSV shape the bench command
emits, followed by the seeding and ordering ablations at a fixed beam.
"""

import argparse

import gridann as ga
from gridann.bench import (BenchConfig, bench_ablations, bench_run,
                           compute_oracles, rows_to_csv)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--queries", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = ga.make_uniform_dataset(args.n, 16, 2, seed=args.seed)
    index = ga.build_index(ds, ga.BuildParams(rng_seed=args.seed))
    queries, sel = ga.generate_queries(ds, args.queries, k=10,
                                       seed=args.seed + 1)
    print(f"{args.queries} queries, mean selectivity {sel.mean():.1%}")

    oracles = compute_oracles(ds, queries, 10)
    config = BenchConfig(k=10, beams=(16, 32, 64, 128, 256, 512))
    rows = bench_run(index, queries, oracles, config)
    print()
    print(rows_to_csv(rows), end="")

    beam = 64
    ablations = bench_ablations(index, queries, oracles, k=10, beam=beam)
    print(f"\nmean recall@10 at beam {beam} with features removed:")
    for name, recall in ablations.items():
        print(f"  {name:<18} {recall:.4f}")


if __name__ == "__main__":
    main()
