"""Record/query model: validation, predicate checks, distance functions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridann.core import (Dataset, DistanceMetric, Predicate, RangeQuery,
                          distance, satisfies, satisfies_mask)


class TestPredicate:
    def test_fields(self):
        p = Predicate(1, 0.25, 0.75)
        assert (p.attr, p.low, p.high) == (1, 0.25, 0.75)

    def test_point_interval_allowed(self):
        RangeQuery(vector=np.zeros(4, np.float32),
                   predicates=[Predicate(0, 0.5, 0.5)])

    def test_inverted_interval_rejected(self):
        with pytest.raises(ValueError):
            RangeQuery(vector=np.zeros(4, np.float32),
                       predicates=[(0, 0.7, 0.3)])

    def test_negative_attribute_rejected(self):
        with pytest.raises(ValueError):
            RangeQuery(vector=np.zeros(4, np.float32),
                       predicates=[(-1, 0.0, 1.0)])

    def test_bad_k_rejected(self):
        with pytest.raises(ValueError):
            RangeQuery(vector=np.zeros(4, np.float32), predicates=(), k=0)

    def test_tuples_coerced(self):
        q = RangeQuery(vector=np.zeros(4, np.float32),
                       predicates=[(0, 0, 1), (1, -2, 2)])
        assert all(isinstance(p, Predicate) for p in q.predicates)


class TestDataset:
    def test_shapes(self):
        ds = Dataset(vectors=np.zeros((5, 3), np.float32),
                     attributes=np.zeros((5, 2)))
        assert (ds.n, ds.dim, ds.num_attributes) == (5, 3, 2)

    def test_no_attributes_means_zero_columns(self):
        ds = Dataset(vectors=np.zeros((5, 3), np.float32))
        assert ds.num_attributes == 0

    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Dataset(vectors=np.zeros((5, 3), np.float32),
                    attributes=np.zeros((4, 2)))

    def test_nan_vector_rejected(self):
        v = np.zeros((3, 2), np.float32)
        v[1, 0] = np.nan
        with pytest.raises(ValueError):
            Dataset(vectors=v)

    def test_record_view(self):
        ds = Dataset(vectors=np.arange(6, dtype=np.float32).reshape(3, 2),
                     attributes=np.arange(3.0)[:, None])
        rec = ds.record(2)
        assert rec.id == 2
        np.testing.assert_array_equal(rec.vector, [4.0, 5.0])


class TestSatisfies:
    def test_empty_predicates_vacuous(self):
        assert satisfies(np.array([1.0, 2.0]), ())

    def test_closed_interval_includes_endpoints(self):
        row = np.array([0.5])
        assert satisfies(row, [Predicate(0, 0.5, 0.9)])
        assert satisfies(row, [Predicate(0, 0.1, 0.5)])
        assert not satisfies(row, [Predicate(0, 0.51, 0.9)])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=4),
           st.data())
    @settings(max_examples=60, deadline=None)
    def test_mask_agrees_with_scalar(self, row, data):
        """The vectorized mask equals the per-row check on random inputs."""
        row = np.asarray(row)
        m = len(row)
        n_preds = data.draw(st.integers(0, 3))
        preds = []
        for _ in range(n_preds):
            a = data.draw(st.integers(0, m - 1))
            lo = data.draw(st.floats(-1e6, 1e6))
            hi = data.draw(st.floats(lo, 1e6))
            preds.append(Predicate(a, lo, hi))
        mat = np.vstack([row, row + 1.0, row - 1.0])
        mask = satisfies_mask(mat, preds)
        for i in range(len(mat)):
            assert mask[i] == satisfies(mat[i], preds)


class TestDistance:
    def test_squared_euclidean_matches_float64(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(33).astype(np.float32)
        y = rng.standard_normal(33).astype(np.float32)
        want = float(((x.astype(np.float64) - y.astype(np.float64)) ** 2).sum())
        got = distance(x, y, DistanceMetric.SQUARED_EUCLIDEAN)
        assert got == pytest.approx(want, rel=1e-5)

    def test_negative_inner_product(self):
        x = np.array([1.0, 2.0], np.float32)
        y = np.array([3.0, -1.0], np.float32)
        assert distance(x, y, DistanceMetric.NEGATIVE_INNER_PRODUCT) == \
            pytest.approx(-1.0)

    def test_identical_points_zero(self):
        x = np.linspace(0, 1, 16).astype(np.float32)
        assert distance(x, x) == 0.0
