"""Binary index file format.

Single little-endian file: a fixed header (magic ``GMG1``, format version,
dataset and graph dimensions, build seed), a named section table
(name, dtype, shape, offset, byte length), then the raw array payloads.

Per-cell intra adjacencies live in their own sections (``intra/<cell>``) so
the out-of-core executor can load one batch of cells without touching the
rest of the file; :class:`IndexReader` exposes exactly that. ``load_index``
reads everything eagerly and reconstructs the in-memory index.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from .grid import CellAssignment, GridSpec
from .histogram import ClusterHistogram
from .index import (BuildParams, GridGraphIndex, InterCellEdges,
                    IntraCellGraph, FORMAT_VERSION)
from .quantize import Codebook

MAGIC = b"GMG1"

_HEADER = struct.Struct("<4sIQIIIIIIQI")
#          magic, version, n, dim, m, p, S, d, l, seed, section_count


@dataclass(frozen=True)
class SectionInfo:
    name: str
    dtype: str
    shape: tuple
    offset: int
    nbytes: int


def _le(arr: np.ndarray) -> np.ndarray:
    """Contiguous little-endian copy-if-needed of an array."""
    dt = arr.dtype.newbyteorder("<")
    return np.ascontiguousarray(arr, dtype=dt)


def _pack_entry(info: SectionInfo) -> bytes:
    name_b = info.name.encode()
    dtype_b = info.dtype.encode()
    out = struct.pack("<H", len(name_b)) + name_b
    out += struct.pack("<H", len(dtype_b)) + dtype_b
    out += struct.pack("<B", len(info.shape))
    for s in info.shape:
        out += struct.pack("<Q", s)
    out += struct.pack("<QQ", info.offset, info.nbytes)
    return out


def _collect_sections(index: GridGraphIndex) -> list[tuple[str, np.ndarray]]:
    grid, asg = index.grid, index.assignment
    params_json = json.dumps(asdict(index.params), sort_keys=True).encode()
    sections = [
        ("params", np.frombuffer(params_json, dtype=np.uint8)),
        ("grid/attrs", grid.attrs),
        ("grid/segments", grid.segments),
        ("grid/boundaries", np.concatenate([np.asarray(b, np.float64)
                                            for b in grid.boundaries])
         if grid.p else np.empty(0, np.float64)),
        ("grid/seg_lo", np.concatenate([np.asarray(b, np.float64)
                                        for b in grid.seg_lo])
         if grid.p else np.empty(0, np.float64)),
        ("grid/seg_hi", np.concatenate([np.asarray(b, np.float64)
                                        for b in grid.seg_hi])
         if grid.p else np.empty(0, np.float64)),
        ("assign/cell_of", asg.cell_of),
        ("assign/member_rank", asg.member_rank),
        ("assign/members_flat", asg.members_flat),
        ("assign/members_start", asg.members_start),
        ("assign/cell_bounds", asg.cell_bounds),
        ("inter/edges", index.inter.edges),
        ("hist/centroids", index.histogram.centroids),
        ("hist/counts", index.histogram.counts),
        ("codebook/vmin", index.codebook.vmin),
        ("codebook/scale", index.codebook.scale),
        ("codes", index.codes),
        ("attrs/values", index.attributes),
    ]
    for g in index.intra:
        sections.append((f"intra/{g.cell_id}", g.adjacency))
    return sections


def save_index(index: GridGraphIndex, path: str) -> None:
    """Write the index (everything except the original vectors) to one file."""
    sections = [(name, _le(arr)) for name, arr in _collect_sections(index)]
    entries = []
    table_bytes = 0
    for name, arr in sections:
        info = SectionInfo(name, arr.dtype.str, arr.shape, 0, arr.nbytes)
        entries.append(info)
        table_bytes += len(_pack_entry(info))
    offset = _HEADER.size + table_bytes
    placed = []
    for info in entries:
        placed.append(SectionInfo(info.name, info.dtype, info.shape,
                                  offset, info.nbytes))
        offset += info.nbytes
    header = _HEADER.pack(
        MAGIC, index.format_version, index.n, index.dim,
        index.attributes.shape[1], index.grid.p, index.num_cells,
        index.params.intra_degree, index.params.inter_degree,
        index.params.rng_seed, len(placed))
    with open(path, "wb") as fh:
        fh.write(header)
        for info in placed:
            fh.write(_pack_entry(info))
        for (_, arr), info in zip(sections, placed):
            assert fh.tell() == info.offset
            fh.write(arr.tobytes())


class IndexReader:
    """Section-level access to an index file, with lazy per-cell reads."""

    def __init__(self, path: str):
        self.path = path
        with open(path, "rb") as fh:
            head = fh.read(_HEADER.size)
            if len(head) < _HEADER.size:
                raise ValueError(f"{path}: truncated header")
            (magic, version, n, dim, m, p, s, d, l, seed,
             count) = _HEADER.unpack(head)
            if magic != MAGIC:
                raise ValueError(f"{path}: bad magic {magic!r}, "
                                 f"expected {MAGIC!r}")
            if version != FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported format version {version}")
            self.format_version = version
            self.n, self.dim, self.m, self.p = n, dim, m, p
            self.num_cells, self.intra_degree, self.inter_degree = s, d, l
            self.seed = seed
            self.sections: dict[str, SectionInfo] = {}
            for _ in range(count):
                (name_len,) = struct.unpack("<H", fh.read(2))
                name = fh.read(name_len).decode()
                (dtype_len,) = struct.unpack("<H", fh.read(2))
                dtype = fh.read(dtype_len).decode()
                (ndim,) = struct.unpack("<B", fh.read(1))
                shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
                off, nbytes = struct.unpack("<QQ", fh.read(16))
                self.sections[name] = SectionInfo(name, dtype, shape,
                                                  off, nbytes)

    def section_bytes(self, name: str) -> int:
        return self.sections[name].nbytes

    def read(self, name: str) -> np.ndarray:
        """Eagerly read one section into memory."""
        if name not in self.sections:
            raise KeyError(f"{self.path}: no section named {name!r}")
        info = self.sections[name]
        with open(self.path, "rb") as fh:
            fh.seek(info.offset)
            raw = fh.read(info.nbytes)
        if len(raw) != info.nbytes:
            raise ValueError(f"{self.path}: truncated section {name!r} "
                             f"({len(raw)} of {info.nbytes} bytes)")
        return np.frombuffer(raw, dtype=np.dtype(info.dtype)).reshape(info.shape)

    def memmap(self, name: str) -> np.ndarray:
        """Map one section without reading it; pages load on access."""
        info = self.sections[name]
        return np.memmap(self.path, dtype=np.dtype(info.dtype), mode="r",
                         offset=info.offset, shape=info.shape)

    def cell_adjacency(self, cell_id: int) -> np.ndarray:
        return self.read(f"intra/{cell_id}")

    def cell_adjacency_bytes(self, cell_id: int) -> int:
        return self.sections[f"intra/{cell_id}"].nbytes

    def params(self) -> BuildParams:
        raw = bytes(self.read("params"))
        return BuildParams(**json.loads(raw.decode()))


def _split(flat: np.ndarray, lengths) -> list:
    out, pos = [], 0
    for ln in lengths:
        out.append(np.array(flat[pos:pos + ln]))
        pos += ln
    return out


def load_index(path: str) -> GridGraphIndex:
    """Read a complete index back into memory (vectors stay detached)."""
    rd = IndexReader(path)
    params = rd.params()
    segments = np.array(rd.read("grid/segments"))
    grid = GridSpec(
        attrs=np.array(rd.read("grid/attrs")),
        segments=segments,
        boundaries=_split(rd.read("grid/boundaries"),
                          [int(s) - 1 for s in segments]),
        seg_lo=_split(rd.read("grid/seg_lo"), [int(s) for s in segments]),
        seg_hi=_split(rd.read("grid/seg_hi"), [int(s) for s in segments]))
    assignment = CellAssignment(
        cell_of=np.array(rd.read("assign/cell_of")),
        member_rank=np.array(rd.read("assign/member_rank")),
        members_flat=np.array(rd.read("assign/members_flat")),
        members_start=np.array(rd.read("assign/members_start")),
        cell_bounds=np.array(rd.read("assign/cell_bounds")))
    intra = [IntraCellGraph(cell_id=c, adjacency=np.array(rd.cell_adjacency(c)))
             for c in range(rd.num_cells)]
    histogram = ClusterHistogram(
        centroids=np.array(rd.read("hist/centroids")),
        counts=np.array(rd.read("hist/counts")),
        top_m=params.top_m)
    codebook = Codebook(vmin=np.array(rd.read("codebook/vmin")),
                        scale=np.array(rd.read("codebook/scale")))
    return GridGraphIndex(
        grid=grid, assignment=assignment, intra=intra,
        inter=InterCellEdges(edges=np.array(rd.read("inter/edges"))),
        histogram=histogram, codebook=codebook,
        codes=np.array(rd.read("codes")),
        attributes=np.array(rd.read("attrs/values")),
        params=params, format_version=rd.format_version)
