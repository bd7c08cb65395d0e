"""Show why visit order matters when the data is clustered.

Each query's admissible cells are visited sequentially, so putting the cell
that actually holds the nearest neighbors early lets later cells start from
good candidates and prune harder.  The cluster histogram estimates how many
likely-near records each cell holds; this script measures how much earlier
it places the true nearest neighbor's cell compared to plain id order, and
what that is worth in recall at a fixed beam.
"""

import argparse

import numpy as np

import gridann as ga
from gridann.search import SearchParams, Workspace, plan_cells, search


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--queries", type=int, default=200)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    ds = ga.make_clustered_dataset(args.n, 16, 2, num_clusters=8,
                                   spread=0.03, seed=args.seed)
    index = ga.build_index(ds, ga.BuildParams(rng_seed=0))
    queries, _ = ga.generate_queries(ds, args.queries, k=10, seed=17,
                                     width_range=(0.05, 0.8))
    oracles = [ga.brute_force_search(ds, q)[0] for q in queries]
    ws = Workspace.for_size(index.n)

    # where does the true nearest neighbor's cell land in the visit order?
    cell_of = index.assignment.cell_of
    gains = []
    for q, oracle in zip(queries, oracles):
        if len(oracle) == 0:
            continue
        target_cell = int(cell_of[oracle[0]])
        ordered, _ = plan_cells(index, q, SearchParams(k=10))
        by_id = np.sort(ordered)
        pos_ranked = int(np.flatnonzero(ordered == target_cell)[0])
        pos_id = int(np.flatnonzero(by_id == target_cell)[0])
        gains.append(pos_id - pos_ranked)
    gains = np.array(gains)
    print("true-NN cell position, id order minus ranked order "
          "(positive = ranked order visits it earlier):")
    print(f"  mean {gains.mean():+.2f} positions; earlier on "
          f"{np.mean(gains > 0):.0%} of queries, unchanged on "
          f"{np.mean(gains == 0):.0%}, later on {np.mean(gains < 0):.0%}")
    print("  (an early hit lets every later cell prune against it; it also "
          "feeds\n   batch scheduling, which bills a query for each batch "
          "it stays active in)")

    # the cross-cell hops themselves are worth actual recall at a fixed beam
    print("\nmean recall@10 by beam, with and without inter-cell seeding:")
    print(f"{'beam':>5} {'inter-seeded':>13} {'random-only':>12}")
    for beam in (16, 32, 64):
        cols = []
        for seeded in (True, False):
            params = SearchParams(k=10, beam=beam, use_inter_seeding=seeded)
            recall = np.mean([
                ga.recall_at_k(search(index, q, params, ws).ids, o, 10)
                for q, o in zip(queries, oracles)])
            cols.append(recall)
        print(f"{beam:>5} {cols[0]:>13.4f} {cols[1]:>12.4f}")


if __name__ == "__main__":
    main()
