"""Synthetic data, .fvecs/.ivecs I/O, exact ground truth and LID.

Ground truth doubles as the exhaustive-search baseline: the full scan it
performs is timed and the wall seconds are carried on the result.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import MetricKind, VectorSet
from .errors import DomainError, FormatError, UsageError

# Defaults for the MLE intrinsic-dimension estimator; chosen to
# reproduce published magnitudes on uniform data (the estimator's
# neighborhood size is otherwise a free parameter; smaller k inflates
# the estimate noticeably at d >= 32).
LID_K_DEFAULT = 400
LID_SAMPLE_DEFAULT = 10_000

_GT_CHUNK = 256  # queries per distance-matrix block


def generate_uniform(n: int, d: int, seed: int,
                     metric: MetricKind = MetricKind.L2,
                     name: str = "") -> VectorSet:
    """n vectors with i.i.d. uniform [0, 1) coordinates; bit-reproducible."""
    if n < 1 or d < 1:
        raise UsageError("n and d must be >= 1")
    rng = np.random.default_rng(seed)
    data = rng.random((n, d), dtype=np.float32)
    return VectorSet(data, metric=metric, name=name or f"rand{n}x{d}", seed=seed)


# ---------------------------------------------------------------------------
# .fvecs / .ivecs: repeated [int32 d][d x 4-byte element], little-endian.
# ---------------------------------------------------------------------------

def _read_vecs(path, element_dtype) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) == 0:
        return np.empty((0, 0), dtype=element_dtype)
    if len(raw) < 4:
        raise FormatError("truncated record header", offset=0)
    d = int(np.frombuffer(raw, dtype="<i4", count=1)[0])
    if d <= 0:
        raise FormatError(f"non-positive dimension {d}", offset=0)
    record = 4 + 4 * d
    if len(raw) % record != 0:
        raise FormatError("truncated record",
                          offset=(len(raw) // record) * record)
    n = len(raw) // record
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(n, record)
    dims = arr[:, :4].copy().view("<i4").ravel()
    if np.any(dims != d):
        bad = int(np.argmax(dims != d))
        raise FormatError(f"inconsistent dimension {dims[bad]} != {d}",
                          offset=bad * record)
    return arr[:, 4:].copy().view(element_dtype).reshape(n, d)


def read_fvecs(path) -> np.ndarray:
    """Float32 matrix from an .fvecs file (n=0, d=0 for an empty file)."""
    return _read_vecs(path, "<f4")


def read_ivecs(path) -> np.ndarray:
    """Int32 matrix from an .ivecs file."""
    return _read_vecs(path, "<i4")


def _write_vecs(mat: np.ndarray, path) -> None:
    mat = np.ascontiguousarray(mat)
    n, d = mat.shape if mat.ndim == 2 else (0, 0)
    if n == 0:
        Path(path).write_bytes(b"")
        return
    out = np.empty((n, 1 + d), dtype="<i4")
    out[:, 0] = d
    out[:, 1:] = mat.view("<i4") if mat.dtype != np.int32 else mat
    Path(path).write_bytes(out.tobytes())


def write_fvecs(mat: np.ndarray, path) -> None:
    _write_vecs(np.ascontiguousarray(mat, dtype="<f4"), path)


def write_ivecs(mat: np.ndarray, path) -> None:
    _write_vecs(np.ascontiguousarray(mat, dtype="<i4"), path)


def read_vectors(path, metric: MetricKind = MetricKind.L2,
                 normalize: bool | None = None) -> VectorSet:
    """Load an .fvecs file as a VectorSet.

    Cosine sets are L2-normalized on load (recorded on the set) unless
    normalize=False is passed explicitly.
    """
    data = read_fvecs(path)
    if data.size == 0:
        data = data.reshape(0, 1)
    vs = VectorSet(data, metric=metric, name=Path(path).stem)
    if normalize is None:
        normalize = metric is MetricKind.COSINE
    return vs.normalize() if normalize and vs.n else vs


def write_vectors(vs: VectorSet, path) -> None:
    write_fvecs(vs.data, path)


def write_metadata(vs: VectorSet, path) -> None:
    """Line-oriented key=value sidecar describing a stored dataset."""
    lines = [
        f"name={vs.name}",
        f"n={vs.n}",
        f"d={vs.d}",
        f"metric={vs.metric.value}",
        f"seed={'' if vs.seed is None else vs.seed}",
        f"normalized={int(vs.normalized)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_metadata(path) -> dict:
    meta = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and "=" in line:
            key, val = line.split("=", 1)
            meta[key.strip()] = val.strip()
    return meta


# ---------------------------------------------------------------------------
# Exact ground truth
# ---------------------------------------------------------------------------

@dataclass
class GroundTruth:
    ids: np.ndarray        # int32 (nq, k)
    dists: np.ndarray      # float32 (nq, k), ascending per row
    scan_seconds: float    # wall time of the exhaustive scan

    @property
    def nq(self) -> int:
        return self.ids.shape[0]

    @property
    def k(self) -> int:
        return self.ids.shape[1]


def _pairwise_sq(queries: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    q = queries.astype(np.float64)
    c = candidates.astype(np.float64)
    sq = (np.sum(q * q, axis=1)[:, None] - 2.0 * (q @ c.T)
          + np.sum(c * c, axis=1)[None, :])
    np.maximum(sq, 0.0, out=sq)
    return sq


def _pairwise_dist(queries, candidates, metric: MetricKind) -> np.ndarray:
    if metric is MetricKind.L2:
        return np.sqrt(_pairwise_sq(queries, candidates))
    q = queries.astype(np.float64)
    c = candidates.astype(np.float64)
    nq = np.linalg.norm(q, axis=1)
    nc = np.linalg.norm(c, axis=1)
    if np.any(nq == 0.0) or np.any(nc == 0.0):
        raise DomainError("cosine distance undefined for a zero vector")
    return 1.0 - (q @ c.T) / np.outer(nq, nc)


def brute_force_knn(candidates: VectorSet, queries: VectorSet,
                    k: int) -> GroundTruth:
    """Exact k nearest per query by full scan; ties by ascending id."""
    if candidates.d != queries.d:
        raise UsageError("dimension mismatch between candidates and queries")
    if k > candidates.n:
        raise UsageError(f"k={k} exceeds candidate count {candidates.n}")
    if k < 1:
        raise UsageError("k must be >= 1")
    t0 = time.perf_counter()
    nq = queries.n
    out_ids = np.empty((nq, k), dtype=np.int32)
    out_dists = np.empty((nq, k), dtype=np.float32)
    for lo in range(0, nq, _GT_CHUNK):
        hi = min(lo + _GT_CHUNK, nq)
        dmat = _pairwise_dist(queries.data[lo:hi], candidates.data,
                              candidates.metric)
        for row in range(dmat.shape[0]):
            drow = dmat[row].astype(np.float32)
            if k < candidates.n:
                thresh = np.partition(drow, k - 1)[k - 1]
                sel = np.flatnonzero(drow <= thresh)
            else:
                sel = np.arange(candidates.n)
            order = sel[np.lexsort((sel, drow[sel]))][:k]
            out_ids[lo + row] = order
            out_dists[lo + row] = drow[order]
    elapsed = time.perf_counter() - t0
    return GroundTruth(out_ids, out_dists, elapsed)


def write_ground_truth(gt: GroundTruth, stem) -> None:
    """Persist as <stem>.ivecs (ids) + <stem>.fvecs (distances)."""
    stem = Path(stem)
    write_ivecs(gt.ids, stem.with_suffix(".ivecs"))
    write_fvecs(gt.dists, stem.with_suffix(".fvecs"))


def read_ground_truth(stem) -> GroundTruth:
    stem = Path(stem)
    ids = read_ivecs(stem.with_suffix(".ivecs"))
    dists = read_fvecs(stem.with_suffix(".fvecs"))
    return GroundTruth(ids.astype(np.int32), dists.astype(np.float32), 0.0)


# ---------------------------------------------------------------------------
# Local intrinsic dimension (MLE over neighbor-distance ratios)
# ---------------------------------------------------------------------------

@dataclass
class LidEstimate:
    value: float
    k_neighbors: int
    sample_size: int


def estimate_lid(vs: VectorSet, k_neighbors: int = LID_K_DEFAULT,
                 sample_size: int | None = None, seed: int = 0) -> LidEstimate:
    """Mean MLE intrinsic dimension over randomly sampled anchor points.

    Per anchor with neighbor distances T_1 <= ... <= T_k (anchor itself
    excluded), the local estimate is
    ((1/(k-1)) * sum_j ln(T_k / T_j))^-1; anchors with any T_j = 0 are
    skipped.
    """
    if k_neighbors < 5:
        raise UsageError("k_neighbors must be >= 5")
    if sample_size is None:
        sample_size = min(vs.n, LID_SAMPLE_DEFAULT)
    if sample_size > vs.n:
        raise UsageError("sample_size exceeds dataset size")
    if vs.n <= k_neighbors:
        raise UsageError("dataset too small for the requested neighborhood")
    rng = np.random.default_rng(seed)
    anchors = np.sort(rng.choice(vs.n, size=sample_size, replace=False))
    k = k_neighbors
    locals_ = []
    chunk = max(1, int(2e8 // max(vs.n, 1)))
    for lo in range(0, sample_size, chunk):
        sub = anchors[lo:lo + chunk]
        dmat = _pairwise_dist(vs.data[sub], vs.data, vs.metric)
        # k+1 smallest includes the anchor itself at distance ~0
        part = np.partition(dmat, k, axis=1)[:, :k + 1]
        part.sort(axis=1)
        T = part[:, 1:k + 1]
        ok = T[:, 0] > 0.0
        T = T[ok]
        if T.shape[0] == 0:
            continue
        logs = np.log(T[:, -1][:, None] / T[:, :-1])
        locals_.extend(1.0 / (np.sum(logs, axis=1) / (k - 1)))
    if not locals_:
        raise DomainError("all anchors skipped (duplicate nearest points)")
    return LidEstimate(float(np.mean(locals_)), k, sample_size)
