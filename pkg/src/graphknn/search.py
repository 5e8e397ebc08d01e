"""Flat-graph best-first search with random seeding, plus the
per-query trace instrumentation and distance-range bucketing.

The searcher maintains a single bounded pool of size ef: it evaluates
seed_count distinct random seeds, then repeatedly expands the nearest
unexpanded pool member, evaluating unvisited neighbors, until every
remaining pool member has been expanded.  No vertex is distance-evaluated
twice within one query.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K_
from ._rng import derive_seed, make_state, rng_next
from .core import VectorSet
from .errors import UsageError
from .graphs import NeighborGraph

DEFAULT_BUCKETS = 10


@dataclass
class SearchTrace:
    """Best distance so far after each distance evaluation, in order."""

    best_dists: np.ndarray  # float64, length == total_evaluations
    total_evaluations: int

    @property
    def terminal_best(self) -> float:
        return float(self.best_dists[-1]) if len(self.best_dists) else np.inf

    def check_monotone(self) -> bool:
        return bool(np.all(np.diff(self.best_dists) <= 0.0))


@dataclass
class RangeHistogram:
    """Evaluations spent per distance range, aggregated over queries.

    edges are strictly descending; bucket i covers (edges[i+1], edges[i]],
    with out-of-range values clamped into the end buckets."""

    edges: np.ndarray        # float64, descending, len = buckets + 1
    counts: np.ndarray       # int64, len = buckets
    query_count: int

    @property
    def total(self) -> int:
        return int(np.sum(self.counts))


@njit(cache=True)
def _best_first_kernel(data, indptr, nbr_ids, q, ef, seed_count, rng_state,
                       metric_code, record, trace_buf):
    n = data.shape[0]
    visited = np.zeros(n, dtype=np.uint8)
    p_ids = np.empty(ef, dtype=np.int32)
    p_dists = np.empty(ef, dtype=np.float64)
    p_exp = np.zeros(ef, dtype=np.uint8)
    cnt = 0
    evals = 0
    best = np.inf
    drawn = 0
    while drawn < seed_count:
        s = np.int64(rng_next(rng_state) % np.uint64(n))
        if visited[s]:
            continue
        visited[s] = 1
        d = K_.dist(data[s], q, metric_code)
        evals += 1
        if d < best:
            best = d
        if record and evals <= trace_buf.shape[0]:
            trace_buf[evals - 1] = best
        cnt = K_.pool_insert(p_ids, p_dists, p_exp, cnt, s, d)
        drawn += 1
    while True:
        idx = K_.pool_first_unexpanded(p_exp, cnt)
        if idx < 0:
            break
        p_exp[idx] = 1
        c = p_ids[idx]
        for t in range(indptr[c], indptr[c + 1]):
            u = nbr_ids[t]
            if visited[u]:
                continue
            visited[u] = 1
            d = K_.dist(data[u], q, metric_code)
            evals += 1
            if d < best:
                best = d
            if record and evals <= trace_buf.shape[0]:
                trace_buf[evals - 1] = best
            cnt = K_.pool_insert(p_ids, p_dists, p_exp, cnt, u, d)
    return p_ids[:cnt], p_dists[:cnt], evals


def best_first_search(graph: NeighborGraph, data: VectorSet, query,
                      ef: int, k: int, seed_count: int | None = None,
                      seed: int = 0, query_index: int = 0,
                      record_trace: bool = False):
    """Search a flat graph; returns (ids, dists, evaluations, trace).

    seed_count defaults to ef.  The seed stream is derived from
    (seed, query_index) so traces are reproducible per query.
    """
    if graph.n == 0 or data.n == 0:
        raise UsageError("empty graph")
    if graph.n != data.n:
        raise UsageError("graph and data vertex counts differ")
    if seed_count is None:
        seed_count = ef
    if seed_count < 1:
        raise UsageError("seed_count must be >= 1")
    if seed_count > data.n:
        raise UsageError("seed_count exceeds vertex count")
    if k > ef:
        raise UsageError("k must not exceed ef")
    q = np.ascontiguousarray(query, dtype=np.float32).ravel()
    state = make_state(derive_seed(seed, query_index))
    trace_buf = (np.empty(data.n, dtype=np.float64) if record_trace
                 else np.empty(0, dtype=np.float64))
    ids, dists, evals = _best_first_kernel(
        data.data, graph.indptr, graph.ids, q, int(ef), int(seed_count),
        state, data.metric.code, record_trace, trace_buf)
    kk = min(k, len(ids))
    trace = None
    if record_trace:
        trace = SearchTrace(trace_buf[:evals].copy(), evals)
    return ids[:kk].copy(), dists[:kk].copy(), evals, trace


def default_bucket_edges(traces, ground_truth_dists,
                         buckets: int = DEFAULT_BUCKETS) -> np.ndarray:
    """Geometric edges between the mean first best distance and the mean
    ground-truth distance over the traced queries, descending."""
    firsts = [t.best_dists[0] for t in traces if t.total_evaluations > 0]
    if not firsts:
        raise UsageError("no non-empty traces")
    top = float(np.mean(firsts))
    bottom = float(np.mean(ground_truth_dists))
    bottom = max(bottom, 1e-12)
    if top <= bottom:
        top = bottom * 2.0
    return np.geomspace(top, bottom, buckets + 1)


def bucket_trace(traces, edges) -> RangeHistogram:
    """Attribute each evaluation to the bucket holding its best-so-far."""
    if not traces:
        raise UsageError("empty trace list")
    edges = np.asarray(edges, dtype=np.float64)
    if np.any(np.diff(edges) >= 0):
        raise UsageError("bucket edges must be strictly descending")
    buckets = len(edges) - 1
    counts = np.zeros(buckets, dtype=np.int64)
    ascending = edges[::-1]
    for tr in traces:
        # position among ascending edges, then flip back and clamp
        pos = np.searchsorted(ascending, tr.best_dists, side="left")
        idx = len(edges) - 1 - pos
        np.clip(idx, 0, buckets - 1, out=idx)
        counts += np.bincount(idx, minlength=buckets)
    return RangeHistogram(edges, counts, len(traces))


def write_trace_csv(traces, path) -> None:
    """CSV columns: query_id, evaluation_index, best_distance."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["query_id", "evaluation_index", "best_distance"])
        for qid, tr in enumerate(traces):
            for i, b in enumerate(tr.best_dists):
                wr.writerow([qid, i, repr(float(b))])


def write_histogram_csv(hist: RangeHistogram, path) -> None:
    """CSV columns: bucket_low, bucket_high, evaluations."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["bucket_low", "bucket_high", "evaluations"])
        for i in range(len(hist.counts)):
            wr.writerow([repr(float(hist.edges[i + 1])),
                         repr(float(hist.edges[i])),
                         int(hist.counts[i])])
