"""Flat neighbor-graph container, the "KNNG" binary format, and audits.

The same CSR-style container backs raw k-NN graphs, diversified graphs
and exported bottom layers, so every flat-graph consumer (search, audit,
file I/O) sees one representation.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import MetricKind, VectorSet, distance
from .errors import AuditError, FormatError, UsageError

MAGIC = b"KNNG"
VERSION = 1


@dataclass
class NeighborGraph:
    """Per-vertex neighbor lists (id, distance), CSR layout.

    Lists are sorted ascending by (distance, id); no self-loops, no
    duplicate ids within a list.
    """

    indptr: np.ndarray   # int64, shape (n+1,)
    ids: np.ndarray      # int32, shape (nnz,)
    dists: np.ndarray    # float32, shape (nnz,)
    provenance: str = "knn"

    def __post_init__(self):
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.ids = np.ascontiguousarray(self.ids, dtype=np.int32)
        self.dists = np.ascontiguousarray(self.dists, dtype=np.float32)

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def max_degree(self) -> int:
        if self.n == 0:
            return 0
        return int(np.max(np.diff(self.indptr)))

    def neighbors(self, v: int):
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return self.ids[lo:hi], self.dists[lo:hi]

    @classmethod
    def from_lists(cls, lists, provenance="knn") -> "NeighborGraph":
        """Build from an iterable of per-vertex [(id, dist), ...] lists."""
        indptr = np.zeros(len(lists) + 1, dtype=np.int64)
        all_ids, all_dists = [], []
        for v, entries in enumerate(lists):
            entries = sorted(entries, key=lambda e: (np.float32(e[1]), e[0]))
            indptr[v + 1] = indptr[v] + len(entries)
            all_ids.extend(e[0] for e in entries)
            all_dists.extend(e[1] for e in entries)
        return cls(indptr,
                   np.asarray(all_ids, dtype=np.int32),
                   np.asarray(all_dists, dtype=np.float32),
                   provenance=provenance)

    @classmethod
    def from_padded(cls, ids, dists, counts, provenance="knn") -> "NeighborGraph":
        """Build from padded (n, K) arrays plus a per-vertex count."""
        n = ids.shape[0]
        counts = np.asarray(counts, dtype=np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        mask = np.arange(ids.shape[1])[None, :] < counts[:, None]
        return cls(indptr, ids[mask].astype(np.int32),
                   dists[mask].astype(np.float32), provenance=provenance)


def write_graph(graph: NeighborGraph, path) -> None:
    """Serialize in the KNNG layout (all little-endian).

    magic "KNNG", version byte, n uint32, then per vertex:
    count uint32 followed by count x [id uint32, dist float32].
    """
    path = Path(path)
    rec = np.empty(len(graph.ids), dtype=[("id", "<u4"), ("dist", "<f4")])
    rec["id"] = graph.ids
    rec["dist"] = graph.dists
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<B", VERSION))
    buf.write(struct.pack("<I", graph.n))
    for v in range(graph.n):
        lo, hi = graph.indptr[v], graph.indptr[v + 1]
        buf.write(struct.pack("<I", int(hi - lo)))
        buf.write(rec[lo:hi].tobytes())
    path.write_bytes(buf.getvalue())
    sidecar = path.with_suffix(path.suffix + ".meta")
    sidecar.write_text(f"provenance={graph.provenance}\n")


def read_graph(path) -> NeighborGraph:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 9:
        raise FormatError("file too short for KNNG header", offset=len(raw))
    if raw[:4] != MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}", offset=0)
    if raw[4] != VERSION:
        raise FormatError(f"unsupported version {raw[4]}", offset=4)
    n = struct.unpack_from("<I", raw, 5)[0]
    off = 9
    indptr = np.zeros(n + 1, dtype=np.int64)
    ids_parts, dist_parts = [], []
    rec_dtype = np.dtype([("id", "<u4"), ("dist", "<f4")])
    for v in range(n):
        if off + 4 > len(raw):
            raise FormatError("truncated vertex count", offset=off)
        cnt = struct.unpack_from("<I", raw, off)[0]
        off += 4
        nbytes = cnt * 8
        if off + nbytes > len(raw):
            raise FormatError("truncated neighbor records", offset=off)
        rec = np.frombuffer(raw, dtype=rec_dtype, count=cnt, offset=off)
        off += nbytes
        indptr[v + 1] = indptr[v] + cnt
        ids_parts.append(rec["id"].astype(np.int32))
        dist_parts.append(rec["dist"].astype(np.float32))
    if off != len(raw):
        raise FormatError("trailing bytes after last vertex", offset=off)
    ids = np.concatenate(ids_parts) if ids_parts else np.empty(0, np.int32)
    dists = np.concatenate(dist_parts) if dist_parts else np.empty(0, np.float32)
    provenance = "knn"
    sidecar = path.with_suffix(path.suffix + ".meta")
    if sidecar.exists():
        for line in sidecar.read_text().splitlines():
            if line.startswith("provenance="):
                provenance = line.split("=", 1)[1].strip()
    return NeighborGraph(indptr, ids, dists, provenance=provenance)


def audit_graph(graph: NeighborGraph, data: VectorSet | None = None,
                rel_tol: float = 1e-5, check_distances: bool = True) -> None:
    """Raise AuditError if any structural invariant fails.

    Checks: list sortedness by (dist, id), no self-loops, no duplicates,
    ids in range, and (when data is given) stored distances against
    recomputed ones.
    """
    n = graph.n
    if graph.indptr[0] != 0 or graph.indptr[-1] != len(graph.ids):
        raise AuditError("indptr does not span the edge arrays")
    if np.any(np.diff(graph.indptr) < 0):
        raise AuditError("negative degree")
    if len(graph.ids) and (graph.ids.min() < 0 or graph.ids.max() >= n):
        raise AuditError("neighbor id out of range")
    for v in range(n):
        ids, dists = graph.neighbors(v)
        if np.any(ids == v):
            raise AuditError(f"self-loop at vertex {v}")
        if len(np.unique(ids)) != len(ids):
            raise AuditError(f"duplicate neighbor at vertex {v}")
        if len(ids) > 1:
            d0, d1 = dists[:-1], dists[1:]
            bad = (d1 < d0) | ((d1 == d0) & (ids[1:] < ids[:-1]))
            if np.any(bad):
                raise AuditError(f"unsorted neighbor list at vertex {v}")
    if data is not None and check_distances:
        for v in range(n):
            ids, dists = graph.neighbors(v)
            for u, dd in zip(ids, dists):
                true = distance(data.data[v], data.data[u], data.metric)
                if abs(dd - true) > rel_tol * max(1.0, abs(true)):
                    raise AuditError(
                        f"stored distance {dd} for edge {v}->{u} "
                        f"differs from recomputed {true}")


def audit_symmetry(graph: NeighborGraph) -> None:
    """Raise AuditError unless every directed edge has its reverse."""
    edge_set = set()
    for v in range(graph.n):
        ids, _ = graph.neighbors(v)
        for u in ids:
            edge_set.add((v, int(u)))
    for v, u in edge_set:
        if (u, v) not in edge_set:
            raise AuditError(f"edge {v}->{u} has no reverse edge")
