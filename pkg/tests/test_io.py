"""Exchange formats: *vecs files, attribute CSV, query JSONL, config files."""

import json

import numpy as np
import pytest

from gridann.core import Predicate, RangeQuery
from gridann.io import (load_attributes_csv, load_bvecs, load_config,
                        load_fvecs, load_ivecs, load_queries_jsonl,
                        save_attributes_csv, save_bvecs, save_fvecs,
                        save_ivecs, save_queries_jsonl)


class TestVecsRoundTrip:
    def test_fvecs(self, tmp_path):
        mat = np.random.default_rng(0).normal(size=(17, 5)).astype(np.float32)
        path = tmp_path / "x.fvecs"
        save_fvecs(path, mat)
        back = load_fvecs(path)
        assert back.dtype == np.float32
        np.testing.assert_array_equal(back, mat)

    def test_bvecs(self, tmp_path):
        mat = np.random.default_rng(1).integers(0, 256, size=(9, 12),
                                                dtype=np.uint8)
        path = tmp_path / "x.bvecs"
        save_bvecs(path, mat)
        back = load_bvecs(path)
        assert back.dtype == np.uint8
        np.testing.assert_array_equal(back, mat)

    def test_ivecs_with_negatives(self, tmp_path):
        mat = np.array([[-1, 2, 3], [7, -8, 9]], dtype=np.int32)
        path = tmp_path / "x.ivecs"
        save_ivecs(path, mat)
        np.testing.assert_array_equal(load_ivecs(path), mat)

    def test_single_record(self, tmp_path):
        path = tmp_path / "one.fvecs"
        save_fvecs(path, np.array([[1.5, -2.5]], dtype=np.float32))
        back = load_fvecs(path)
        assert back.shape == (1, 2)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.fvecs"
        path.write_bytes(b"")
        assert load_fvecs(path).shape == (0, 0)


class TestVecsMalformed:
    def test_truncated_header(self, tmp_path):
        path = tmp_path / "bad.fvecs"
        path.write_bytes(b"\x01\x00")
        with pytest.raises(ValueError, match="truncated header"):
            load_fvecs(path)

    def test_nonpositive_dimension(self, tmp_path):
        path = tmp_path / "bad.fvecs"
        path.write_bytes(np.int32(0).tobytes() + b"\x00" * 8)
        with pytest.raises(ValueError, match="nonpositive dimension"):
            load_fvecs(path)

    def test_trailing_garbage(self, tmp_path):
        path = tmp_path / "bad.fvecs"
        good = np.int32(2).tobytes() + np.zeros(2, dtype="<f4").tobytes()
        path.write_bytes(good + b"\x99")
        with pytest.raises(ValueError, match="not a multiple"):
            load_fvecs(path)

    def test_inconsistent_record_dims(self, tmp_path):
        # two records claiming different dims but equal byte length
        path = tmp_path / "bad.bvecs"
        rec1 = np.int32(4).tobytes() + bytes(4)
        rec2 = np.int32(3).tobytes() + bytes(4)
        path.write_bytes(rec1 + rec2)
        with pytest.raises(ValueError, match="inconsistent"):
            load_bvecs(path)


class TestAttributesCsv:
    def test_round_trip_exact(self, tmp_path):
        attrs = np.random.default_rng(2).random((30, 3))
        path = tmp_path / "a.csv"
        save_attributes_csv(path, attrs)
        np.testing.assert_array_equal(load_attributes_csv(path), attrs)

    def test_header_names(self, tmp_path):
        path = tmp_path / "a.csv"
        save_attributes_csv(path, np.zeros((2, 2)))
        assert path.read_text().splitlines()[0] == "id,a_1,a_2"

    def test_rows_in_any_order(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("id,a_1\n2,0.3\n0,0.1\n1,0.2\n")
        np.testing.assert_allclose(load_attributes_csv(path).ravel(),
                                   [0.1, 0.2, 0.3])

    def test_bad_header(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("record,a_1\n0,0.5\n")
        with pytest.raises(ValueError, match="header"):
            load_attributes_csv(path)

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("id,a_1,a_2\n0,0.5\n")
        with pytest.raises(ValueError, match="fields"):
            load_attributes_csv(path)

    def test_gapped_ids(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("id,a_1\n0,0.1\n2,0.2\n")
        with pytest.raises(ValueError, match="ids"):
            load_attributes_csv(path)


class TestQueriesJsonl:
    def test_round_trip(self, tmp_path):
        queries = [
            RangeQuery(vector=np.array([1.0, 2.0], dtype=np.float32),
                       predicates=(Predicate(0, 0.25, 0.75),
                                   Predicate(1, -1.0, 1.0)), k=7),
            RangeQuery(vector=np.array([0.0, -3.5], dtype=np.float32), k=4),
        ]
        path = tmp_path / "q.jsonl"
        save_queries_jsonl(path, queries)
        back = load_queries_jsonl(path)
        assert len(back) == 2
        for orig, got in zip(queries, back):
            np.testing.assert_array_equal(got.vector, orig.vector)
            assert got.k == orig.k
            assert len(got.predicates) == len(orig.predicates)
            for p, q in zip(got.predicates, orig.predicates):
                assert (p.attr, p.low, p.high) == (q.attr, q.low, q.high)

    def test_defaults_and_blank_lines(self, tmp_path):
        path = tmp_path / "q.jsonl"
        path.write_text('{"q": [1.0, 2.0]}\n\n{"q": [3.0, 4.0], "k": 2}\n')
        back = load_queries_jsonl(path)
        assert [q.k for q in back] == [10, 2]
        assert all(len(q.predicates) == 0 for q in back)

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "q.jsonl"
        path.write_text('{"q": [1.0]}\n{oops}\n')
        with pytest.raises(ValueError, match=":2:"):
            load_queries_jsonl(path)


class TestConfig:
    def test_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"k": 5, "query": {"beam": 32}}))
        cfg = load_config(path)
        assert cfg["k"] == 5
        assert cfg["query"]["beam"] == 32

    def test_toml(self, tmp_path):
        path = tmp_path / "c.toml"
        path.write_text('k = 5\n[query]\nbeam = 32\n')
        cfg = load_config(path)
        assert cfg["k"] == 5
        assert cfg["query"]["beam"] == 32

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("k: 5\n")
        with pytest.raises(ValueError, match="unsupported config format"):
            load_config(path)
