"""Approximate k-NN graph construction by neighbor-of-neighbor descent.

Starts each vertex with K random neighbors and iteratively cross-compares
sampled neighbor/reverse-neighbor pairs, keeping the best K per vertex,
until the update rate drops below a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K_
from ._rng import make_state, rng_next
from .core import VectorSet
from .errors import UsageError
from .graphs import NeighborGraph


@dataclass
class NnDescentParams:
    rho: float = 0.5            # candidate sample rate in (0, 1]
    delta: float = 0.001        # stop when update fraction falls below
    max_iterations: int = 30

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise UsageError("rho must be in (0, 1]")
        if not (0.0 <= self.delta < 1.0):
            raise UsageError("delta must be in [0, 1)")
        if self.max_iterations < 1:
            raise UsageError("max_iterations must be >= 1")


@dataclass
class KnnGraph:
    graph: NeighborGraph
    K: int
    iterations: int
    evaluations: int
    mean_distances: np.ndarray  # per completed iteration, for audits


@njit(cache=True, inline="always")
def _contains(row, count, u):
    for t in range(count):
        if row[t] == u:
            return True
    return False


@njit(cache=True, inline="always")
def _prio_push(slot_ids, slot_prio, u, pr):
    """Reservoir push keeping the lowest-priority entries, no duplicates."""
    cap = slot_ids.shape[0]
    for t in range(cap):
        if slot_ids[t] == u:
            return
    worst = 0
    for t in range(1, cap):
        if slot_prio[t] > slot_prio[worst]:
            worst = t
    if pr < slot_prio[worst]:
        slot_ids[worst] = u
        slot_prio[worst] = pr


@njit(cache=True)
def _list_push(ids, dists, flags, v, u, d, K):
    """Checked sorted insert into vertex v's full list; returns 1 on update."""
    if u == v:
        return 0
    wd = dists[v, K - 1]
    if d > wd or (d == wd and u >= ids[v, K - 1]):
        return 0
    for t in range(K):
        if ids[v, t] == u:
            return 0
    pos = K - 1
    for t in range(K):
        if d < dists[v, t] or (d == dists[v, t] and u < ids[v, t]):
            pos = t
            break
    for t in range(K - 1, pos, -1):
        ids[v, t] = ids[v, t - 1]
        dists[v, t] = dists[v, t - 1]
        flags[v, t] = flags[v, t - 1]
    ids[v, pos] = u
    dists[v, pos] = np.float32(d)
    flags[v, pos] = 1
    return 1


@njit(cache=True)
def _nnd_build(data, K, rho, delta, max_iters, seed, metric_code):
    n = data.shape[0]
    ids = np.full((n, K), -1, dtype=np.int32)
    dists = np.full((n, K), np.inf, dtype=np.float32)
    flags = np.zeros((n, K), dtype=np.uint8)
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    evals = 0

    # random initialization: K distinct neighbors per vertex
    for v in range(n):
        filled = 0
        while filled < K:
            u = np.int64(rng_next(state) % np.uint64(n))
            if u == v or _contains(ids[v], K, u):
                continue
            d = np.float32(K_.dist(data[v], data[u], metric_code))
            evals += 1
            _list_push(ids, dists, flags, v, u, d, K)
            filled += 1

    max_cand = max(1, int(rho * K))
    mean_dist = np.empty(max_iters, dtype=np.float64)
    iters = 0
    for _ in range(max_iters):
        new_ids = np.full((n, max_cand), -1, dtype=np.int32)
        new_prio = np.full((n, max_cand), np.uint64(0xFFFFFFFFFFFFFFFF),
                           dtype=np.uint64)
        old_ids = np.full((n, max_cand), -1, dtype=np.int32)
        old_prio = np.full((n, max_cand), np.uint64(0xFFFFFFFFFFFFFFFF),
                           dtype=np.uint64)
        # sample forward and reverse candidates with random priorities
        for v in range(n):
            for j in range(K):
                u = ids[v, j]
                if flags[v, j] == 1:
                    _prio_push(new_ids[v], new_prio[v], u, rng_next(state))
                    _prio_push(new_ids[u], new_prio[u], np.int32(v),
                               rng_next(state))
                else:
                    _prio_push(old_ids[v], old_prio[v], u, rng_next(state))
                    _prio_push(old_ids[u], old_prio[u], np.int32(v),
                               rng_next(state))
        # clear the new flag of sampled candidates
        for v in range(n):
            for j in range(K):
                if flags[v, j] == 1 and _contains(new_ids[v], max_cand,
                                                 ids[v, j]):
                    flags[v, j] = 0
        # local join
        c = 0
        for v in range(n):
            for i in range(max_cand):
                p = new_ids[v, i]
                if p < 0:
                    continue
                for j in range(i + 1, max_cand):
                    q = new_ids[v, j]
                    if q < 0 or q == p:
                        continue
                    d = np.float32(K_.dist(data[p], data[q], metric_code))
                    evals += 1
                    c += _list_push(ids, dists, flags, p, q, d, K)
                    c += _list_push(ids, dists, flags, q, p, d, K)
                for j in range(max_cand):
                    q = old_ids[v, j]
                    if q < 0 or q == p:
                        continue
                    d = np.float32(K_.dist(data[p], data[q], metric_code))
                    evals += 1
                    c += _list_push(ids, dists, flags, p, q, d, K)
                    c += _list_push(ids, dists, flags, q, p, d, K)
        mean_dist[iters] = np.sum(dists.astype(np.float64)) / (n * K)
        iters += 1
        if c <= delta * n * K:
            break
    return ids, dists, iters, evals, mean_dist[:iters]


def build_knn_graph(data: VectorSet, K: int,
                    params: NnDescentParams | None = None,
                    seed: int = 0) -> KnnGraph:
    """NN-Descent construction of an approximate K-NN graph."""
    if data.n < 2:
        raise UsageError("need at least two vectors")
    if K >= data.n:
        raise UsageError(f"K={K} must be smaller than n={data.n}")
    params = params or NnDescentParams()
    ids, dists, iters, evals, mean_dist = _nnd_build(
        data.data, K, params.rho, params.delta, params.max_iterations,
        seed, data.metric.code)
    counts = np.full(data.n, K, dtype=np.int64)
    graph = NeighborGraph.from_padded(ids, dists, counts, provenance="knn")
    return KnnGraph(graph, K, iters, evals, mean_dist)


def brute_force_knn_graph(data: VectorSet, K: int) -> NeighborGraph:
    """Exact K-NN graph by full scan (quality reference, small n only)."""
    from .datasets import brute_force_knn
    gt = brute_force_knn(data, data, K + 1)
    lists = []
    for v in range(data.n):
        entries = [(int(i), float(d))
                   for i, d in zip(gt.ids[v], gt.dists[v]) if i != v]
        lists.append(entries[:K])
    return NeighborGraph.from_lists(lists, provenance="knn-exact")


def graph_recall(graph: NeighborGraph, exact: NeighborGraph,
                 at_k: int, rel_tol: float = 1e-6) -> float:
    """Mean top-at_k overlap against the exact graph, ties by distance."""
    if graph.n != exact.n:
        raise UsageError("vertex count mismatch")
    total = 0.0
    for v in range(graph.n):
        a_ids, a_dists = graph.neighbors(v)
        e_ids, e_dists = exact.neighbors(v)
        if len(a_ids) < at_k or len(e_ids) < at_k:
            raise UsageError(f"vertex {v} has fewer than {at_k} neighbors")
        e_top = set(int(i) for i in e_ids[:at_k])
        kth = float(e_dists[at_k - 1])
        hits = 0
        for i, d in zip(a_ids[:at_k], a_dists[:at_k]):
            if int(i) in e_top or d <= kth + rel_tol * max(1.0, kth):
                hits += 1
        total += hits / at_k
    return total / graph.n
