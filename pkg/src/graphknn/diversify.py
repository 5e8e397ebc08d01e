"""Neighborhood diversification of flat k-NN graphs.

Two pruning rules over a sorted source list, plus the reverse-neighbor
union that makes the pruned graph symmetric:

* occlusion pruning (GD): scan candidates by ascending distance, keep e
  only if e is strictly closer to the vertex than to every kept
  neighbor; at most ceil(L/2) kept.
* proximity pruning (DPG): keep e only if no other source-list member is
  strictly closer to e than the vertex is (ties keep).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import _kernels as K_
from .core import VectorSet
from .errors import UsageError
from .graphs import NeighborGraph

# ceil(L/2): cap on the number of neighbors GD keeps per vertex
def gd_cap(L: int) -> int:
    return (L + 1) // 2


@njit(cache=True)
def _gd_kernel(indptr, ids, dists, data, metric_code):
    n = indptr.shape[0] - 1
    out_indptr = np.zeros(n + 1, dtype=np.int64)
    out_ids = np.empty(ids.shape[0], dtype=np.int32)
    out_dists = np.empty(ids.shape[0], dtype=np.float32)
    pos = 0
    for a in range(n):
        lo, hi = indptr[a], indptr[a + 1]
        cap = (hi - lo + 1) // 2
        kept_start = pos
        for t in range(lo, hi):
            if pos - kept_start >= cap:
                break
            e = ids[t]
            d_ea = dists[t]
            ok = True
            for s_i in range(kept_start, pos):
                s = out_ids[s_i]
                d_es = np.float32(K_.dist(data[e], data[s], metric_code))
                if not (d_ea < d_es):
                    ok = False
                    break
            if ok:
                out_ids[pos] = e
                out_dists[pos] = d_ea
                pos += 1
        out_indptr[a + 1] = pos
    return out_indptr, out_ids[:pos], out_dists[:pos]


@njit(cache=True)
def _dpg_kernel(indptr, ids, dists, data, metric_code):
    n = indptr.shape[0] - 1
    out_indptr = np.zeros(n + 1, dtype=np.int64)
    out_ids = np.empty(ids.shape[0], dtype=np.int32)
    out_dists = np.empty(ids.shape[0], dtype=np.float32)
    pos = 0
    for a in range(n):
        lo, hi = indptr[a], indptr[a + 1]
        kept_start = pos
        for t in range(lo, hi):
            e = ids[t]
            d_ea = dists[t]
            ok = True
            for t2 in range(lo, hi):
                if t2 == t:
                    continue
                s = ids[t2]
                d_es = np.float32(K_.dist(data[e], data[s], metric_code))
                if d_es < d_ea:
                    ok = False
                    break
            if ok:
                out_ids[pos] = e
                out_dists[pos] = d_ea
                pos += 1
        if pos == kept_start and hi > lo:
            # rule emptied the list: retain the nearest source neighbor
            out_ids[pos] = ids[lo]
            out_dists[pos] = dists[lo]
            pos += 1
        out_indptr[a + 1] = pos
    return out_indptr, out_ids[:pos], out_dists[:pos]


def _check_sorted(graph: NeighborGraph) -> None:
    for v in range(graph.n):
        _, d = graph.neighbors(v)
        if len(d) > 1 and np.any(np.diff(d) < 0):
            raise UsageError(f"source list of vertex {v} is not sorted")


def gd_prune(graph: NeighborGraph, data: VectorSet) -> NeighborGraph:
    """Occlusion pruning, capped at ceil(L/2) kept per vertex."""
    if graph.n != data.n:
        raise UsageError("graph and data vertex counts differ")
    _check_sorted(graph)
    indptr, ids, dists = _gd_kernel(graph.indptr, graph.ids, graph.dists,
                                    data.data, data.metric.code)
    return NeighborGraph(indptr, ids, dists, provenance="GD")


def dpg_prune(graph: NeighborGraph, data: VectorSet) -> NeighborGraph:
    """Proximity pruning: drop members closer to another member than to
    the vertex; a vertex always retains at least its nearest neighbor."""
    if graph.n != data.n:
        raise UsageError("graph and data vertex counts differ")
    _check_sorted(graph)
    indptr, ids, dists = _dpg_kernel(graph.indptr, graph.ids, graph.dists,
                                     data.data, data.metric.code)
    return NeighborGraph(indptr, ids, dists, provenance="DPG")


def add_reverse_edges(graph: NeighborGraph) -> NeighborGraph:
    """Union with reverse neighbors: for every a->b ensure b->a.

    Deterministic two-phase merge; lists re-sorted by (dist, id), no
    duplicates, true distances preserved.
    """
    n = graph.n
    degrees = np.diff(graph.indptr)
    src = np.repeat(np.arange(n, dtype=np.int64), degrees)
    verts = np.concatenate([src, graph.ids.astype(np.int64)])
    nbrs = np.concatenate([graph.ids.astype(np.int64), src])
    dd = np.concatenate([graph.dists, graph.dists])
    order = np.lexsort((nbrs, dd, verts))
    verts, nbrs, dd = verts[order], nbrs[order], dd[order]
    if len(verts):
        keep = np.ones(len(verts), dtype=bool)
        keep[1:] = (verts[1:] != verts[:-1]) | (nbrs[1:] != nbrs[:-1])
        verts, nbrs, dd = verts[keep], nbrs[keep], dd[keep]
    counts = np.bincount(verts, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    tag = graph.provenance
    tag = tag + "+reverse" if not tag.endswith("+reverse") else tag
    return NeighborGraph(indptr, nbrs.astype(np.int32),
                         dd.astype(np.float32), provenance=tag)


def kgraph_gd_pipeline(graph: NeighborGraph, data: VectorSet) -> NeighborGraph:
    """Occlusion-prune a k-NN graph then append reverse neighbors."""
    return add_reverse_edges(gd_prune(graph, data))


def dpg_pipeline(graph: NeighborGraph, data: VectorSet) -> NeighborGraph:
    """Proximity-prune a k-NN graph then append reverse neighbors."""
    return add_reverse_edges(dpg_prune(graph, data))


def audit_gd(pruned: NeighborGraph, source: NeighborGraph,
             data: VectorSet) -> None:
    """Verify the occlusion inequality and the ceil(L/2) cap per vertex."""
    from .errors import AuditError
    for a in range(pruned.n):
        kept, kd = pruned.neighbors(a)
        L = source.degree(a)
        if len(kept) > gd_cap(L):
            raise AuditError(f"vertex {a} keeps more than ceil(L/2) neighbors")
        for i in range(len(kept)):
            for j in range(i):
                d_is = np.float32(K_.dist(data.data[kept[i]],
                                          data.data[kept[j]],
                                          data.metric.code))
                if not (kd[i] < d_is):
                    raise AuditError(
                        f"occlusion inequality violated at vertex {a}: "
                        f"kept {kept[i]} vs earlier {kept[j]}")
