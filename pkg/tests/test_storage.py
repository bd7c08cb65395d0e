"""Single-file index serialization: round trips, lazy reads, corruption."""

import struct

import numpy as np
import pytest

from gridann.core import Predicate, RangeQuery
from gridann.search import SearchParams, search
from gridann.storage import MAGIC, IndexReader, load_index, save_index


@pytest.fixture(scope="module")
def saved(tmp_path_factory, index_small):
    path = str(tmp_path_factory.mktemp("idx") / "small.gmg")
    save_index(index_small, path)
    return path


class TestRoundTrip:
    def test_arrays_identical(self, saved, index_small):
        loaded = load_index(saved)
        np.testing.assert_array_equal(loaded.codes, index_small.codes)
        np.testing.assert_array_equal(loaded.inter.edges,
                                      index_small.inter.edges)
        np.testing.assert_array_equal(loaded.attributes,
                                      index_small.attributes)
        np.testing.assert_array_equal(loaded.assignment.cell_of,
                                      index_small.assignment.cell_of)
        np.testing.assert_array_equal(loaded.assignment.members_flat,
                                      index_small.assignment.members_flat)
        np.testing.assert_array_equal(loaded.histogram.centroids,
                                      index_small.histogram.centroids)
        np.testing.assert_array_equal(loaded.histogram.counts,
                                      index_small.histogram.counts)
        np.testing.assert_array_equal(loaded.codebook.vmin,
                                      index_small.codebook.vmin)
        np.testing.assert_array_equal(loaded.codebook.scale,
                                      index_small.codebook.scale)
        for a, b in zip(loaded.intra, index_small.intra):
            assert a.cell_id == b.cell_id
            np.testing.assert_array_equal(a.adjacency, b.adjacency)
        assert loaded.params == index_small.params
        np.testing.assert_array_equal(loaded.grid.attrs, index_small.grid.attrs)
        np.testing.assert_array_equal(loaded.grid.segments,
                                      index_small.grid.segments)
        for t in range(loaded.grid.p):
            np.testing.assert_array_equal(loaded.grid.boundaries[t],
                                          index_small.grid.boundaries[t])
            np.testing.assert_array_equal(loaded.grid.seg_lo[t],
                                          index_small.grid.seg_lo[t])
            np.testing.assert_array_equal(loaded.grid.seg_hi[t],
                                          index_small.grid.seg_hi[t])

    def test_vectors_stay_detached(self, saved):
        loaded = load_index(saved)
        assert loaded.vectors is None

    def test_loaded_index_searches_identically(self, saved, uniform_small,
                                               index_small):
        loaded = load_index(saved)
        loaded.attach_vectors(uniform_small.vectors)
        params = SearchParams(beam=64)
        queries = [RangeQuery(vector=np.full(8, v), k=10,
                              predicates=[Predicate(0, 0.1, 0.8)])
                   for v in (0.2, 0.5, 0.8)]
        for q in queries:
            a = search(index_small, q, params)
            b = search(loaded, q, params)
            np.testing.assert_array_equal(a.ids, b.ids)
            np.testing.assert_array_equal(a.distances, b.distances)
            assert a.num_distance_evals == b.num_distance_evals

    def test_save_deterministic(self, tmp_path, index_small):
        p1 = str(tmp_path / "a.gmg")
        p2 = str(tmp_path / "b.gmg")
        save_index(index_small, p1)
        save_index(index_small, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestReader:
    def test_header_fields(self, saved, index_small):
        rd = IndexReader(saved)
        assert rd.n == index_small.n
        assert rd.dim == index_small.dim
        assert rd.m == index_small.attributes.shape[1]
        assert rd.p == index_small.grid.p
        assert rd.num_cells == index_small.num_cells
        assert rd.intra_degree == index_small.params.intra_degree
        assert rd.inter_degree == index_small.params.inter_degree
        assert rd.seed == index_small.params.rng_seed

    def test_lazy_cell_reads_match(self, saved, index_small):
        rd = IndexReader(saved)
        for c in range(index_small.num_cells):
            np.testing.assert_array_equal(rd.cell_adjacency(c),
                                          index_small.intra[c].adjacency)
            assert rd.cell_adjacency_bytes(c) == \
                index_small.intra[c].adjacency.nbytes

    def test_memmap_matches_read(self, saved):
        rd = IndexReader(saved)
        for name in ("codes", "inter/edges", "attrs/values"):
            np.testing.assert_array_equal(np.asarray(rd.memmap(name)),
                                          rd.read(name))

    def test_params_round_trip(self, saved, index_small):
        rd = IndexReader(saved)
        assert rd.params() == index_small.params

    def test_missing_section_keyerror(self, saved):
        rd = IndexReader(saved)
        with pytest.raises(KeyError):
            rd.read("no/such/section")

    def test_section_bytes_accounting(self, saved):
        rd = IndexReader(saved)
        total = max(info.offset + info.nbytes
                    for info in rd.sections.values())
        import os
        assert os.path.getsize(saved) == total


class TestCorruption:
    def test_bad_magic(self, tmp_path, saved):
        raw = bytearray(open(saved, "rb").read())
        raw[:4] = b"NOPE"
        bad = tmp_path / "bad.gmg"
        bad.write_bytes(raw)
        with pytest.raises(ValueError, match="magic"):
            IndexReader(str(bad))

    def test_bad_version(self, tmp_path, saved):
        raw = bytearray(open(saved, "rb").read())
        struct.pack_into("<I", raw, 4, 999)
        bad = tmp_path / "badver.gmg"
        bad.write_bytes(raw)
        with pytest.raises(ValueError, match="version"):
            IndexReader(str(bad))

    def test_truncated_header(self, tmp_path):
        bad = tmp_path / "trunc.gmg"
        bad.write_bytes(MAGIC + b"\x00" * 3)
        with pytest.raises(ValueError, match="truncated"):
            IndexReader(str(bad))

    def test_truncated_section(self, tmp_path, saved):
        raw = open(saved, "rb").read()
        bad = tmp_path / "cut.gmg"
        bad.write_bytes(raw[:len(raw) - 128])
        rd = IndexReader(str(bad))
        last = max(rd.sections.values(), key=lambda s: s.offset)
        with pytest.raises(ValueError, match="truncated"):
            rd.read(last.name)
