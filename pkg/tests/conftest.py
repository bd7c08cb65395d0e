"""Shared fixtures: datasets, indexes and query workloads reused across files.

Heavy fixtures are session-scoped; everything is seeded, so any test can be
reproduced in isolation.
"""

import numpy as np
import pytest

import gridann as ga


@pytest.fixture(scope="session", autouse=True)
def jit_warmup():
    """Compile the numba kernels once so timed tests measure steady state."""
    ds = ga.make_uniform_dataset(200, 8, 2, seed=0)
    params = ga.BuildParams(num_cells=4, intra_degree=4, inter_degree=1,
                            ef_construction=16, num_clusters=4, rng_seed=0)
    index = ga.build_index(ds, params)
    query = ga.RangeQuery(vector=ds.vectors[0], predicates=[(0, 0.0, 1.0)], k=3)
    ga.search(index, query, ga.SearchParams(beam=8, rng_seed=0))


@pytest.fixture(scope="session")
def uniform_small():
    """1k uniform records for fast unit checks."""
    return ga.make_uniform_dataset(1000, 8, 2, seed=3)


@pytest.fixture(scope="session")
def index_small(uniform_small):
    params = ga.BuildParams(num_cells=4, intra_degree=8, inter_degree=2,
                            ef_construction=40, num_clusters=16, rng_seed=5)
    index = ga.build_index(uniform_small, params)
    return index


@pytest.fixture(scope="session")
def uniform_10k():
    return ga.make_uniform_dataset(10_000, 16, 2, seed=1)


@pytest.fixture(scope="session")
def index_10k(uniform_10k):
    """Default build: 16 cells, degree 16, 2 inter edges per foreign cell."""
    return ga.build_index(uniform_10k, ga.BuildParams(rng_seed=0))


@pytest.fixture(scope="session")
def queries_200(uniform_10k):
    queries, _ = ga.generate_queries(uniform_10k, 200, k=10, seed=2)
    return queries


@pytest.fixture(scope="session")
def oracles_200(uniform_10k, queries_200):
    return [ga.brute_force_search(uniform_10k, q)[0] for q in queries_200]


@pytest.fixture(scope="session")
def clustered_5k():
    return ga.make_clustered_dataset(5000, 16, 2, num_clusters=8,
                                     spread=0.03, seed=7)


@pytest.fixture(scope="session")
def clustered_index(clustered_5k):
    return ga.build_index(clustered_5k, ga.BuildParams(rng_seed=0))


@pytest.fixture(scope="session")
def big_index(tmp_path_factory):
    """100k records, saved to disk; cheaper construction knobs, default
    cell count and degrees."""
    ds = ga.make_uniform_dataset(100_000, 16, 2, seed=1)
    params = ga.BuildParams(ef_construction=32, num_clusters=64, rng_seed=0)
    index = ga.build_index(ds, params)
    path = tmp_path_factory.mktemp("bigidx") / "big.gmg"
    ga.save_index(index, str(path))
    return ds, index, str(path)


def worked_example_incidence():
    """Four queries, four cells: queries 0,1 need cells {0,2}; 2,3 need {1,3}."""
    return ga.IncidenceMatrix(matrix=np.array(
        [[1, 0, 1, 0],
         [1, 0, 1, 0],
         [0, 1, 0, 1],
         [0, 1, 0, 1]], dtype=np.uint8))
