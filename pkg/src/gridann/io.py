"""Readers and writers for the on-disk exchange formats.

Vector files follow the little-endian *vecs convention: each record is a
4-byte int32 dimension followed by that many payload values (float32 for
.fvecs, uint8 for .bvecs, int32 for .ivecs).  Attributes travel as CSV with
header id,a_1,...,a_m; queries as JSON lines with keys q, filters, k.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import Predicate, RangeQuery


def _read_vecs(path, dtype, item_size):
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return np.empty((0, 0), dtype=dtype)
    if raw.size < 4:
        raise ValueError(f"{path}: truncated header")
    dim = int(np.frombuffer(raw[:4].tobytes(), dtype="<i4")[0])
    if dim <= 0:
        raise ValueError(f"{path}: nonpositive dimension {dim}")
    rec_bytes = 4 + dim * item_size
    if raw.size % rec_bytes != 0:
        raise ValueError(f"{path}: size {raw.size} not a multiple of record "
                         f"size {rec_bytes}")
    n = raw.size // rec_bytes
    mat = raw.reshape(n, rec_bytes)
    dims = mat[:, :4].copy().view("<i4").ravel()
    if not np.all(dims == dim):
        raise ValueError(f"{path}: inconsistent record dimensions")
    payload = mat[:, 4:].copy().view(dtype)
    return np.ascontiguousarray(payload.reshape(n, dim))


def load_fvecs(path) -> np.ndarray:
    """(n, dim) float32 matrix from a .fvecs file."""
    return _read_vecs(path, np.dtype("<f4"), 4).astype(np.float32, copy=False)


def load_bvecs(path) -> np.ndarray:
    """(n, dim) uint8 matrix from a .bvecs file."""
    return _read_vecs(path, np.dtype("u1"), 1)


def load_ivecs(path) -> np.ndarray:
    """(n, dim) int32 matrix from a .ivecs file."""
    return _read_vecs(path, np.dtype("<i4"), 4)


def _write_vecs(path, mat, dtype):
    mat = np.ascontiguousarray(mat, dtype=dtype)
    n, dim = mat.shape
    dims = np.full((n, 1), dim, dtype="<i4")
    out = np.concatenate([dims.view("u1"), mat.view("u1").reshape(n, -1)],
                         axis=1)
    out.tofile(path)


def save_fvecs(path, mat) -> None:
    _write_vecs(path, mat, "<f4")


def save_bvecs(path, mat) -> None:
    _write_vecs(path, mat, "u1")


def save_ivecs(path, mat) -> None:
    _write_vecs(path, mat, "<i4")


def load_attributes_csv(path) -> np.ndarray:
    """(n, m) float64 attribute matrix from id,a_1,...,a_m CSV.

    Rows may appear in any id order; ids must be exactly 0..n-1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "id":
            raise ValueError(f"{path}: expected header starting with 'id'")
        m = len(header) - 1
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != m + 1:
                raise ValueError(f"{path}: row with {len(row)} fields, "
                                 f"expected {m + 1}")
            rows.append((int(row[0]), [float(v) for v in row[1:]]))
    n = len(rows)
    ids = sorted(r[0] for r in rows)
    if ids != list(range(n)):
        raise ValueError(f"{path}: ids are not exactly 0..{n - 1}")
    out = np.empty((n, m), dtype=np.float64)
    for rid, vals in rows:
        out[rid] = vals
    return out


def save_attributes_csv(path, attributes) -> None:
    attributes = np.asarray(attributes, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [f"a_{j + 1}" for j in range(attributes.shape[1])])
        for i, row in enumerate(attributes):
            writer.writerow([i] + [repr(float(v)) for v in row])


def load_queries_jsonl(path) -> list[RangeQuery]:
    """Range queries from a JSON-lines file.

    Each line: {"q": [...], "filters": [{"attr": i, "low": l, "high": r}],
    "k": K}.  filters may be absent or empty; k defaults to 10.
    """
    queries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            preds = tuple(
                Predicate(int(f["attr"]), float(f["low"]), float(f["high"]))
                for f in obj.get("filters", []))
            queries.append(RangeQuery(vector=np.asarray(obj["q"], dtype=np.float32),
                                      predicates=preds,
                                      k=int(obj.get("k", 10))))
    return queries


def save_queries_jsonl(path, queries) -> None:
    with open(path, "w") as fh:
        for q in queries:
            obj = {
                "q": [float(v) for v in q.vector],
                "filters": [{"attr": p.attr, "low": p.low, "high": p.high}
                            for p in q.predicates],
                "k": q.k,
            }
            fh.write(json.dumps(obj) + "\n")


def load_config(path) -> dict:
    """One configuration mapping from a .toml or .json file."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            return json.load(fh)
    if path.suffix == ".toml":
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    raise ValueError(f"unsupported config format: {path.suffix!r} "
                     f"(expected .toml or .json)")
