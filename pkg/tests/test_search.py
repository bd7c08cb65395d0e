"""Filtered graph search: correctness, filter safety, determinism."""

import numpy as np
import pytest

from gridann.core import Dataset, Predicate, RangeQuery, satisfies
from gridann.index import BuildParams, build_index
from gridann.oracle import brute_force_search, mean_recall
from gridann.search import (IndexGraphView, SearchParams, SearchState,
                            Workspace, _hash_picks, make_context, plan_cells,
                            run_cell_sequence, search, search_batch)


@pytest.fixture(scope="module")
def lattice_index():
    """Dataset whose vectors sit exactly on the 8-bit code lattice, indexed
    with complete per-cell graphs.  Code distances equal exact distances and
    a full-width search touches every member, so results must match brute
    force answer for answer."""
    rng = np.random.default_rng(21)
    n = 400
    vecs = rng.integers(0, 256, size=(n, 8)).astype(np.float32)
    vecs[0] = 0.0
    vecs[1] = 255.0  # pin the quantizer range so scale is exactly 1
    attrs = rng.random((n, 2))
    ds = Dataset(vectors=vecs, attributes=attrs)
    params = BuildParams(num_cells=4, intra_degree=100, inter_degree=2,
                         ef_construction=16, num_clusters=16, rng_seed=13)
    return ds, build_index(ds, params)


def _full_width_params(n, k=None):
    return SearchParams(k=k, beam=n, entry_random=n)


class TestExactAgainstOracle:
    def test_unfiltered_equals_brute_force(self, lattice_index):
        ds, index = lattice_index
        rng = np.random.default_rng(0)
        for _ in range(20):
            q = RangeQuery(vector=ds.vectors[rng.integers(0, ds.n)]
                           + rng.integers(-3, 4, 8), k=10)
            res = search(index, q, _full_width_params(ds.n))
            oid, od = brute_force_search(ds, q)
            np.testing.assert_array_equal(res.ids, oid)
            np.testing.assert_allclose(res.distances, od)

    def test_filtered_equals_brute_force(self, lattice_index):
        ds, index = lattice_index
        rng = np.random.default_rng(1)
        for _ in range(30):
            lo = rng.random(2) * 0.7
            width = 0.05 + rng.random(2) * 0.5
            q = RangeQuery(vector=rng.integers(0, 256, 8).astype(float), k=10,
                           predicates=[Predicate(0, lo[0], lo[0] + width[0]),
                                       Predicate(1, lo[1], lo[1] + width[1])])
            res = search(index, q, _full_width_params(ds.n))
            oid, od = brute_force_search(ds, q)
            np.testing.assert_array_equal(res.ids, oid)
            np.testing.assert_allclose(res.distances, od)

    def test_exact_duplicate_ranks_first(self, lattice_index):
        ds, index = lattice_index
        q = RangeQuery(vector=ds.vectors[37].copy(), k=5)
        res = search(index, q, _full_width_params(ds.n))
        assert res.ids[0] == 37
        assert res.distances[0] == 0.0

    def test_fewer_matches_than_k(self, lattice_index):
        ds, index = lattice_index
        # a sliver of attribute space holding just a handful of records
        lo = float(np.sort(ds.attributes[:, 0])[3])
        q = RangeQuery(vector=ds.vectors[5], k=10,
                       predicates=[Predicate(0, 0.0, lo)])
        res = search(index, q, _full_width_params(ds.n))
        oid, od = brute_force_search(ds, q)
        assert 0 < len(oid) < 10
        np.testing.assert_array_equal(res.ids, oid)
        np.testing.assert_allclose(res.distances, od)


class TestRecallAtDeskScale:
    def test_unfiltered_recall(self, uniform_small, index_small):
        rng = np.random.default_rng(2)
        queries = [RangeQuery(vector=rng.random(8), k=10) for _ in range(50)]
        params = SearchParams(beam=64)
        results = [search(index_small, q, params) for q in queries]
        oracles = [brute_force_search(uniform_small, q) for q in queries]
        got = mean_recall([r.ids for r in results],
                          [o[0] for o in oracles], k=10)
        assert got >= 0.9

    def test_filtered_recall_and_safety(self, uniform_small, index_small):
        rng = np.random.default_rng(3)
        recalls = []
        params = SearchParams(beam=128)
        for _ in range(50):
            lo = rng.random() * 0.5
            q = RangeQuery(vector=rng.random(8), k=10,
                           predicates=[Predicate(0, lo, lo + 0.4)])
            res = search(index_small, q, params)
            for rid in res.ids:
                assert satisfies(uniform_small.attributes[rid], q.predicates)
            oid, _ = brute_force_search(uniform_small, q)
            if len(oid):
                inter = len(set(res.ids.tolist()) & set(oid.tolist()))
                recalls.append(inter / len(oid))
        assert np.mean(recalls) >= 0.85

    def test_distances_are_exact(self, uniform_small, index_small):
        """Returned distances always come from a float64 rerank on the raw
        vectors, whatever the traversal tier saw."""
        q = RangeQuery(vector=np.full(8, 0.5), k=10)
        res = search(index_small, q, SearchParams(beam=64))
        v = uniform_small.vectors[res.ids].astype(np.float64)
        expect = np.sum((v - 0.5) ** 2, axis=1)
        np.testing.assert_allclose(res.distances, expect, rtol=1e-12)
        assert np.all(np.diff(res.distances) >= 0)


class TestEmptyAndEdgeCases:
    def test_all_cells_pruned(self, index_small):
        q = RangeQuery(vector=np.zeros(8), k=10,
                       predicates=[Predicate(0, 2.0, 3.0)])
        res = search(index_small, q)
        assert len(res.ids) == 0
        assert len(res.distances) == 0

    def test_no_record_in_range_but_cells_survive(self, uniform_small,
                                                  index_small):
        """A predicate falling in a gap between adjacent attribute values
        exercises the traversal path and still returns nothing."""
        vals = np.sort(uniform_small.attributes[:, 1])
        gaps = np.diff(vals)
        j = int(np.argmax(gaps))
        mid = (vals[j] + vals[j + 1]) / 2
        assert gaps[j] > 0
        q = RangeQuery(vector=np.full(8, 0.5), k=10,
                       predicates=[Predicate(1, mid, mid)])
        res = search(index_small, q)
        assert len(res.ids) == 0
        assert res.num_distance_evals > 0

    def test_k_larger_than_n(self, lattice_index):
        ds, index = lattice_index
        q = RangeQuery(vector=ds.vectors[0], k=ds.n + 100)
        params = SearchParams(beam=ds.n + 100, entry_random=ds.n)
        res = search(index, q, params)
        oid, od = brute_force_search(ds, q)
        assert len(oid) == ds.n
        np.testing.assert_array_equal(res.ids, oid)
        np.testing.assert_allclose(res.distances, od)


class TestRecyclePool:
    def test_recycle_entries_satisfy_filter(self, uniform_small, index_small):
        preds = [Predicate(0, 0.2, 0.6)]
        q = RangeQuery(vector=np.full(8, 0.4), k=5, predicates=preds)
        params = SearchParams(beam=32)
        ctx = make_context(index_small, q, params)
        ws = Workspace.for_size(index_small.n)
        epoch = ws.next_epoch()
        cells, fallback = plan_cells(index_small, q, params)
        assert not fallback
        state = SearchState.allocate(ctx.k, params.beam)
        run_cell_sequence(IndexGraphView(index_small), index_small, ctx,
                          state, cells, ws, epoch)
        rec_n = int(state.counters[2])
        assert rec_n > 0
        for rid in state.rec_i[:rec_n]:
            assert satisfies(uniform_small.attributes[rid], preds)
        r_n = int(state.counters[1])
        for j in range(r_n):
            expect = satisfies(uniform_small.attributes[state.r_i[j]], preds)
            assert bool(state.r_s[j]) == expect
        cand = state.candidate_ids()
        assert len(set(cand.tolist())) == len(cand)


class TestBatchConsistency:
    def test_batch_matches_sequential(self, uniform_small, index_small):
        rng = np.random.default_rng(4)
        queries = []
        for i in range(30):
            preds = []
            if i % 2:
                lo = rng.random() * 0.5
                preds = [Predicate((i // 2) % 2, lo, lo + 0.3)]
            queries.append(RangeQuery(vector=rng.random(8), k=5,
                                      predicates=preds))
        params = SearchParams(beam=48, rng_seed=6)
        solo = [search(index_small, q, params) for q in queries]
        batch = search_batch(index_small, queries, params, workers=4)
        for a, b in zip(solo, batch):
            np.testing.assert_array_equal(a.ids, b.ids)
            np.testing.assert_allclose(a.distances, b.distances)
            assert a.num_distance_evals == b.num_distance_evals

    def test_repeat_searches_identical(self, index_small):
        q = RangeQuery(vector=np.full(8, 0.3), k=10)
        a = search(index_small, q, SearchParams(beam=64))
        b = search(index_small, q, SearchParams(beam=64))
        np.testing.assert_array_equal(a.ids, b.ids)
        np.testing.assert_array_equal(a.distances, b.distances)


class TestCellPlanning:
    def test_ordering_permutes_same_set(self, index_small):
        q = RangeQuery(vector=np.full(8, 0.1), k=10)
        ordered, fb1 = plan_cells(index_small, q, SearchParams())
        plain, fb2 = plan_cells(index_small, q,
                                SearchParams(use_ordering=False))
        assert not fb1 and not fb2
        assert sorted(ordered.tolist()) == plain.tolist()
        assert plain.tolist() == sorted(plain.tolist())

    def test_fallback_triggers_above_threshold(self, index_small):
        q = RangeQuery(vector=np.full(8, 0.1), k=10)
        cells, fb = plan_cells(index_small, q, SearchParams(s_thre=1))
        assert fb
        assert len(cells) == index_small.num_cells

    def test_fallback_search_is_safe(self, uniform_small, index_small):
        preds = [Predicate(0, 0.1, 0.9)]
        q = RangeQuery(vector=np.full(8, 0.5), k=10, predicates=preds)
        res = search(index_small, q, SearchParams(beam=64, s_thre=1))
        assert res.used_fallback
        assert len(res.ids) > 0
        for rid in res.ids:
            assert satisfies(uniform_small.attributes[rid], preds)
        assert np.all(np.diff(res.distances) >= 0)

    def test_result_reports_visited_cells(self, index_small):
        q = RangeQuery(vector=np.full(8, 0.7), k=10)
        res = search(index_small, q, SearchParams(beam=64))
        assert not res.used_fallback
        assert sorted(res.cells.tolist()) == [0, 1, 2, 3]


class TestValidation:
    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            SearchParams(beam=0)
        with pytest.raises(ValueError):
            SearchParams(k=0)
        with pytest.raises(ValueError):
            SearchParams(entry_links=0)
        with pytest.raises(ValueError):
            SearchParams(entry_random=-1)

    def test_beam_smaller_than_k_rejected(self, index_small):
        q = RangeQuery(vector=np.zeros(8), k=10)
        with pytest.raises(ValueError):
            search(index_small, q, SearchParams(beam=4))

    def test_s_thre_out_of_range(self, index_small):
        q = RangeQuery(vector=np.zeros(8), k=1)
        with pytest.raises(ValueError):
            search(index_small, q, SearchParams(s_thre=0))
        with pytest.raises(ValueError):
            search(index_small, q, SearchParams(s_thre=99))


class TestHashPicks:
    def test_distinct_and_in_range(self):
        picks = _hash_picks(7, 3, 10, 50)
        assert len(picks) == 10
        assert len(set(picks.tolist())) == 10
        assert np.all((picks >= 0) & (picks < 50))

    def test_count_at_least_limit_gives_everything(self):
        np.testing.assert_array_equal(_hash_picks(7, 3, 10, 6), np.arange(6))
        np.testing.assert_array_equal(_hash_picks(7, 3, 6, 6), np.arange(6))

    def test_deterministic_per_tag(self):
        a = _hash_picks(1, 2, 8, 100)
        b = _hash_picks(1, 2, 8, 100)
        c = _hash_picks(1, 3, 8, 100)
        np.testing.assert_array_equal(a, b)
        assert a.tolist() != c.tolist()


class TestWorkspace:
    def test_epoch_monotone(self):
        ws = Workspace.for_size(10)
        e1 = ws.next_epoch()
        e2 = ws.next_epoch()
        assert e2 == e1 + 1

    def test_epoch_rollover_clears_marks(self):
        ws = Workspace.for_size(4)
        ws.visited[:] = 5
        ws.epoch = np.iinfo(np.int32).max - 1
        e = ws.next_epoch()
        assert e == 1
        assert np.all(ws.visited == 0)
