"""Hierarchical navigable small world index.

Layered adjacency with long-range links on upper layers.  Insertion
descends greedily from the enter point, runs a bounded best-first search
per layer at or below the drawn level, and selects links with the
occlusion heuristic; overfull neighbor lists are re-pruned with the same
heuristic.  Search descends greedily to layer 0 and finishes with an
ef-bounded best-first pass.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _kernels as K_
from .core import MetricKind, VectorSet, distance
from .errors import AuditError, FormatError, UsageError
from .graphs import NeighborGraph

MAGIC = b"HNSW"
VERSION = 1


def assign_level(u: float, level_decay: float) -> int:
    """Level drawn from the exponentially decaying distribution:
    floor(-ln(u) * level_decay) for u in (0, 1)."""
    if not (0.0 < u < 1.0):
        raise UsageError("u must lie strictly inside (0, 1)")
    if level_decay <= 0.0:
        raise UsageError("level_decay must be positive")
    return int(math.floor(-math.log(u) * level_decay))


@njit(cache=True)
def _occlusion_select(cand_ids, cand_dists, ncand, cap, data, metric_code,
                      out_ids, out_dists):
    """Keep candidates (sorted ascending) passing the occlusion rule.

    A candidate e with distance d_e to the target joins iff
    d_e < dist(e, s) for every already-kept s; at most cap kept.
    """
    ns = 0
    for t in range(ncand):
        if ns >= cap:
            break
        e = cand_ids[t]
        d_e = cand_dists[t]
        ok = True
        for s_i in range(ns):
            d_es = np.float32(K_.dist(data[e], data[out_ids[s_i]],
                                      metric_code))
            if not (d_e < d_es):
                ok = False
                break
        if ok:
            out_ids[ns] = e
            out_dists[ns] = d_e
            ns += 1
    return ns


@njit(cache=True, inline="always")
def _adj_view(lc, l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt, v):
    if lc == 0:
        return l0_ids[v], l0_dists[v], l0_cnt[v]
    return up_ids[lc - 1, v], up_dists[lc - 1, v], up_cnt[lc - 1, v]


@njit(cache=True)
def _greedy_layer(data, q, cur, cur_d, lc,
                  l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt,
                  visited, stamp, metric_code,
                  record, trace_buf, evals, best):
    """Single-best greedy walk on one layer; ties move to the lower id."""
    visited[cur] = stamp
    while True:
        ids_row, _, cnt = _adj_view(lc, l0_ids, l0_dists, l0_cnt,
                                    up_ids, up_dists, up_cnt, cur)
        best_u = -1
        best_d = cur_d
        for t in range(cnt):
            u = ids_row[t]
            if visited[u] == stamp:
                continue
            visited[u] = stamp
            d = K_.dist(data[u], q, metric_code)
            evals += 1
            if d < best:
                best = d
            if record and evals <= trace_buf.shape[0]:
                trace_buf[evals - 1] = best
            if d < best_d or (d == best_d and (best_u < 0 or u < best_u)):
                if d < cur_d or (d == cur_d and u < cur):
                    best_u = u
                    best_d = d
        if best_u < 0:
            break
        cur = best_u
        cur_d = best_d
    return cur, cur_d, evals, best


@njit(cache=True)
def _layer_pool_search(data, q, cur, cur_d, lc, ef,
                       l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt,
                       visited, stamp, metric_code,
                       p_ids, p_dists, p_exp,
                       record, trace_buf, evals, best):
    """Bounded best-first search on one layer from a single entry."""
    cnt = 0
    visited[cur] = stamp
    cnt = K_.pool_insert(p_ids, p_dists, p_exp, cnt, cur, cur_d)
    while True:
        idx = K_.pool_first_unexpanded(p_exp, cnt)
        if idx < 0:
            break
        p_exp[idx] = 1
        c = p_ids[idx]
        ids_row, _, adj_cnt = _adj_view(lc, l0_ids, l0_dists, l0_cnt,
                                        up_ids, up_dists, up_cnt, c)
        for t in range(adj_cnt):
            u = ids_row[t]
            if visited[u] == stamp:
                continue
            visited[u] = stamp
            d = K_.dist(data[u], q, metric_code)
            evals += 1
            if d < best:
                best = d
            if record and evals <= trace_buf.shape[0]:
                trace_buf[evals - 1] = best
            cnt = K_.pool_insert(p_ids, p_dists, p_exp, cnt, u, d)
    return cnt, evals, best


@njit(cache=True)
def _sorted_adj_insert(ids_row, dists_row, cnt, u, d):
    """Insert (u, d) into a sorted adjacency row with free capacity."""
    pos = cnt
    for t in range(cnt):
        if d < dists_row[t] or (d == dists_row[t] and u < ids_row[t]):
            pos = t
            break
    for t in range(cnt, pos, -1):
        ids_row[t] = ids_row[t - 1]
        dists_row[t] = dists_row[t - 1]
    ids_row[pos] = u
    dists_row[pos] = np.float32(d)
    return cnt + 1


@njit(cache=True)
def _insert_one(data, v, lv,
                l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt,
                enter, enter_level, M, max_deg_bottom, efc, metric_code,
                visited, stamp_box):
    """Insert vertex v (level lv) into a non-empty index. Returns
    distance evaluations performed."""
    q = data[v]
    no_trace = np.empty(0, dtype=np.float64)
    evals = 0
    best = np.inf
    cur = enter
    cur_d = K_.dist(data[cur], q, metric_code)
    evals += 1
    # greedy descent on layers above the insertion level
    lc = enter_level
    while lc > lv:
        stamp_box[0] += 1
        cur, cur_d, evals, best = _greedy_layer(
            data, q, cur, cur_d, lc,
            l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt,
            visited, stamp_box[0], metric_code, False, no_trace, evals, best)
        lc -= 1
    p_ids = np.empty(efc, dtype=np.int32)
    p_dists = np.empty(efc, dtype=np.float64)
    p_exp = np.zeros(efc, dtype=np.uint8)
    sel_ids = np.empty(M, dtype=np.int32)
    sel_dists = np.empty(M, dtype=np.float32)
    cap_plus = max_deg_bottom + 1
    tmp_ids = np.empty(cap_plus, dtype=np.int32)
    tmp_dists = np.empty(cap_plus, dtype=np.float32)
    keep_ids = np.empty(cap_plus, dtype=np.int32)
    keep_dists = np.empty(cap_plus, dtype=np.float32)
    top = lv if lv < enter_level else enter_level
    for lc in range(top, -1, -1):
        stamp_box[0] += 1
        cnt, evals, best = _layer_pool_search(
            data, q, cur, cur_d, lc, efc,
            l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt,
            visited, stamp_box[0], metric_code,
            p_ids, p_dists, p_exp, False, no_trace, evals, best)
        cap = max_deg_bottom if lc == 0 else M
        ns = _occlusion_select(p_ids, p_dists.astype(np.float32), cnt, M,
                               data, metric_code, sel_ids, sel_dists)
        # link v -> selected (pool is ascending, so the row stays sorted)
        if lc == 0:
            for t in range(ns):
                l0_ids[v, t] = sel_ids[t]
                l0_dists[v, t] = sel_dists[t]
            l0_cnt[v] = ns
        else:
            for t in range(ns):
                up_ids[lc - 1, v, t] = sel_ids[t]
                up_dists[lc - 1, v, t] = sel_dists[t]
            up_cnt[lc - 1, v] = ns
        # link selected -> v, re-pruning overfull lists
        for t in range(ns):
            s = sel_ids[t]
            d_sv = sel_dists[t]
            s_ids, s_dists, s_cnt = _adj_view(
                lc, l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt, s)
            if s_cnt < cap:
                new_cnt = _sorted_adj_insert(s_ids, s_dists, s_cnt, v, d_sv)
            else:
                # candidate list = current list + v, sorted; occlusion-select
                nc = 0
                inserted = False
                for t2 in range(s_cnt):
                    if not inserted and (
                            d_sv < s_dists[t2]
                            or (d_sv == s_dists[t2] and v < s_ids[t2])):
                        tmp_ids[nc] = v
                        tmp_dists[nc] = d_sv
                        nc += 1
                        inserted = True
                    tmp_ids[nc] = s_ids[t2]
                    tmp_dists[nc] = s_dists[t2]
                    nc += 1
                if not inserted:
                    tmp_ids[nc] = v
                    tmp_dists[nc] = d_sv
                    nc += 1
                kept = _occlusion_select(tmp_ids, tmp_dists, nc, cap,
                                         data, metric_code,
                                         keep_ids, keep_dists)
                for t2 in range(kept):
                    s_ids[t2] = keep_ids[t2]
                    s_dists[t2] = keep_dists[t2]
                new_cnt = kept
            if lc == 0:
                l0_cnt[s] = new_cnt
            else:
                up_cnt[lc - 1, s] = new_cnt
        # entry for the next layer down: nearest pool member
        cur = p_ids[0]
        cur_d = p_dists[0]
    return evals


@njit(cache=True)
def _search_kernel(data, q, l0_ids, l0_dists, l0_cnt, up_ids, up_dists,
                   up_cnt, enter, enter_level, ef, metric_code,
                   record, trace_buf):
    n = data.shape[0]
    visited = np.zeros(n, dtype=np.int64)
    stamp = 0
    evals = 0
    best = np.inf
    cur = enter
    cur_d = K_.dist(data[cur], q, metric_code)
    evals += 1
    best = cur_d
    if record and evals <= trace_buf.shape[0]:
        trace_buf[evals - 1] = best
    for lc in range(enter_level, 0, -1):
        stamp += 1
        cur, cur_d, evals, best = _greedy_layer(
            data, q, cur, cur_d, lc,
            l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt,
            visited, stamp, metric_code, record, trace_buf, evals, best)
    p_ids = np.empty(ef, dtype=np.int32)
    p_dists = np.empty(ef, dtype=np.float64)
    p_exp = np.zeros(ef, dtype=np.uint8)
    stamp += 1
    cnt, evals, best = _layer_pool_search(
        data, q, cur, cur_d, 0, ef,
        l0_ids, l0_dists, l0_cnt, up_ids, up_dists, up_cnt,
        visited, stamp, metric_code, p_ids, p_dists, p_exp,
        record, trace_buf, evals, best)
    return p_ids[:cnt], p_dists[:cnt], evals


class HnswIndex:
    """Mutable layered index over vector ids 0..capacity-1."""

    def __init__(self, capacity: int, M: int = 16,
                 ef_construction: int = 200,
                 level_decay: float | None = None,
                 max_degree_upper: int | None = None,
                 max_degree_bottom: int | None = None,
                 seed: int = 0, metric: MetricKind = MetricKind.L2):
        if capacity < 1:
            raise UsageError("capacity must be >= 1")
        if M < 2:
            raise UsageError("M must be >= 2")
        self.capacity = capacity
        self.M = M
        self.ef_construction = int(ef_construction)
        self.level_decay = (1.0 / math.log(M) if level_decay is None
                            else float(level_decay))
        self.max_degree_upper = M if max_degree_upper is None else max_degree_upper
        self.max_degree_bottom = 2 * M if max_degree_bottom is None else max_degree_bottom
        self.seed = seed
        self.metric = metric
        self._rng = np.random.default_rng(seed)
        self.levels = np.full(capacity, -1, dtype=np.int32)
        self.l0_ids = np.full((capacity, self.max_degree_bottom), -1,
                              dtype=np.int32)
        self.l0_dists = np.zeros((capacity, self.max_degree_bottom),
                                 dtype=np.float32)
        self.l0_cnt = np.zeros(capacity, dtype=np.int32)
        self.up_ids = np.full((0, capacity, self.max_degree_upper), -1,
                              dtype=np.int32)
        self.up_dists = np.zeros((0, capacity, self.max_degree_upper),
                                 dtype=np.float32)
        self.up_cnt = np.zeros((0, capacity), dtype=np.int32)
        self.enter_point = -1
        self.enter_level = -1
        self.count = 0
        self.dim = 0
        self.build_evaluations = 0
        self._visited = np.zeros(capacity, dtype=np.int64)
        self._stamp = np.zeros(1, dtype=np.int64)

    @property
    def max_level(self) -> int:
        return self.enter_level

    def _draw_level(self) -> int:
        u = self._rng.random()
        while u <= 0.0:
            u = self._rng.random()
        return assign_level(u, self.level_decay)

    def _grow_layers(self, level: int) -> None:
        have = self.up_ids.shape[0]
        if level <= have:
            return
        add = level - have
        self.up_ids = np.concatenate(
            [self.up_ids,
             np.full((add, self.capacity, self.max_degree_upper), -1,
                     dtype=np.int32)])
        self.up_dists = np.concatenate(
            [self.up_dists,
             np.zeros((add, self.capacity, self.max_degree_upper),
                      dtype=np.float32)])
        self.up_cnt = np.concatenate(
            [self.up_cnt, np.zeros((add, self.capacity), dtype=np.int32)])

    def insert(self, vid: int, data: VectorSet, level: int | None = None):
        if not (0 <= vid < self.capacity):
            raise UsageError(f"vertex id {vid} out of capacity")
        if self.levels[vid] >= 0:
            raise UsageError(f"vertex {vid} already inserted")
        if level is None:
            level = self._draw_level()
        self._grow_layers(level)
        self.levels[vid] = level
        self.dim = data.d
        if self.count == 0:
            self.enter_point = vid
            self.enter_level = level
            self.count = 1
            return self
        self.build_evaluations += _insert_one(
            data.data, vid, level,
            self.l0_ids, self.l0_dists, self.l0_cnt,
            self.up_ids, self.up_dists, self.up_cnt,
            self.enter_point, self.enter_level,
            self.M, self.max_degree_bottom, self.ef_construction,
            self.metric.code, self._visited, self._stamp)
        if level > self.enter_level:
            self.enter_point = vid
            self.enter_level = level
        self.count += 1
        return self

    def search(self, data: VectorSet, query, ef: int, k: int,
               record_trace: bool = False):
        """Return (ids, dists, trace) for the k nearest found."""
        from .search import SearchTrace
        if self.count == 0:
            raise UsageError("search on an empty index")
        if k > ef:
            raise UsageError("k must not exceed ef")
        q = np.ascontiguousarray(query, dtype=np.float32).ravel()
        trace_buf = (np.empty(data.n, dtype=np.float64) if record_trace
                     else np.empty(0, dtype=np.float64))
        ids, dists, evals = _search_kernel(
            data.data, q, self.l0_ids, self.l0_dists, self.l0_cnt,
            self.up_ids, self.up_dists, self.up_cnt,
            self.enter_point, self.enter_level, int(ef), self.metric.code,
            record_trace, trace_buf)
        kk = min(k, len(ids))
        trace = None
        if record_trace:
            trace = SearchTrace(trace_buf[:min(evals, len(trace_buf))].copy(),
                                evals)
        return ids[:kk].copy(), dists[:kk].copy(), evals, trace


def hnsw_build(data: VectorSet, M: int = 16, ef_construction: int = 200,
               seed: int = 0, level_decay: float | None = None) -> HnswIndex:
    """Insert vertices 0..n-1 in order; deterministic for a fixed seed."""
    if data.n < 1:
        raise UsageError("need at least one vector")
    index = HnswIndex(data.n, M=M, ef_construction=ef_construction,
                      level_decay=level_decay, seed=seed, metric=data.metric)
    for v in range(data.n):
        index.insert(v, data)
    return index


def extract_bottom_layer(index: HnswIndex) -> NeighborGraph:
    """Layer-0 adjacency as a flat graph (the flat-graph configuration)."""
    counts = index.l0_cnt[:index.capacity].astype(np.int64)
    graph = NeighborGraph.from_padded(index.l0_ids, index.l0_dists, counts,
                                      provenance="flat-hnsw")
    return graph


def save_index(index: HnswIndex, path) -> None:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<B", VERSION))
    buf.write(struct.pack("<IIIIIIdII",
                          index.capacity, index.dim, index.M,
                          index.max_degree_upper, index.max_degree_bottom,
                          index.ef_construction, index.level_decay,
                          index.enter_point & 0xFFFFFFFF,
                          max(index.enter_level, 0)))
    for v in range(index.capacity):
        lv = int(index.levels[v])
        buf.write(struct.pack("<i", lv))
        if lv < 0:
            continue
        for lc in range(lv + 1):
            if lc == 0:
                cnt = int(index.l0_cnt[v])
                ids = index.l0_ids[v, :cnt]
            else:
                cnt = int(index.up_cnt[lc - 1, v])
                ids = index.up_ids[lc - 1, v, :cnt]
            buf.write(struct.pack("<I", cnt))
            buf.write(np.ascontiguousarray(ids, dtype="<u4").tobytes())
    from pathlib import Path
    Path(path).write_bytes(buf.getvalue())


def load_index(path, data: VectorSet) -> HnswIndex:
    """Rebuild an index from file; distances recomputed from data."""
    from pathlib import Path
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}", offset=0)
    if raw[4] != VERSION:
        raise FormatError(f"unsupported version {raw[4]}", offset=4)
    header = struct.unpack_from("<IIIIIIdII", raw, 5)
    cap, _d, M, mdu, mdb, efc, decay, enter, max_level = header
    off = 5 + struct.calcsize("<IIIIIIdII")
    if _d and _d != data.d:
        raise UsageError(f"index was built over d={_d}, data has d={data.d}")
    index = HnswIndex(cap, M=M, ef_construction=efc, level_decay=decay,
                      max_degree_upper=mdu, max_degree_bottom=mdb,
                      metric=data.metric)
    index.dim = int(_d)
    index._grow_layers(max_level)
    count = 0
    for v in range(cap):
        if off + 4 > len(raw):
            raise FormatError("truncated vertex level", offset=off)
        lv = struct.unpack_from("<i", raw, off)[0]
        off += 4
        index.levels[v] = lv
        if lv < 0:
            continue
        count += 1
        for lc in range(lv + 1):
            if off + 4 > len(raw):
                raise FormatError("truncated adjacency count", offset=off)
            cnt = struct.unpack_from("<I", raw, off)[0]
            off += 4
            if off + 4 * cnt > len(raw):
                raise FormatError("truncated adjacency ids", offset=off)
            ids = np.frombuffer(raw, dtype="<u4", count=cnt,
                                offset=off).astype(np.int32)
            off += 4 * cnt
            dd = np.array([distance(data.data[v], data.data[u], data.metric)
                           for u in ids], dtype=np.float32)
            if lc == 0:
                index.l0_ids[v, :cnt] = ids
                index.l0_dists[v, :cnt] = dd
                index.l0_cnt[v] = cnt
            else:
                index.up_ids[lc - 1, v, :cnt] = ids
                index.up_dists[lc - 1, v, :cnt] = dd
                index.up_cnt[lc - 1, v] = cnt
    if off != len(raw):
        raise FormatError("trailing bytes", offset=off)
    index.enter_point = int(enter)
    index.enter_level = int(max_level)
    index.count = count
    return index


def audit_index(index: HnswIndex, data: VectorSet | None = None) -> None:
    """Raise AuditError if any structural invariant of the index fails."""
    cap = index.capacity
    inserted = index.levels >= 0
    if index.count != int(np.sum(inserted)):
        raise AuditError("count disagrees with assigned levels")
    if index.count == 0:
        return
    max_assigned = int(np.max(index.levels))
    if index.enter_level != max_assigned:
        raise AuditError("enter level is not the maximum assigned level")
    if index.levels[index.enter_point] != max_assigned:
        raise AuditError("enter point does not carry the maximum level")
    if np.any(index.l0_cnt > index.max_degree_bottom):
        raise AuditError("layer-0 degree cap exceeded")
    if index.up_cnt.size and np.any(index.up_cnt > index.max_degree_upper):
        raise AuditError("upper-layer degree cap exceeded")
    for v in range(cap):
        lv = int(index.levels[v])
        if lv < 0:
            if index.l0_cnt[v] != 0 or (index.up_cnt.size and
                                        np.any(index.up_cnt[:, v] != 0)):
                raise AuditError(f"uninserted vertex {v} has edges")
            continue
        for lc in range(index.up_ids.shape[0] + 1):
            if lc == 0:
                cnt = int(index.l0_cnt[v])
                ids = index.l0_ids[v, :cnt]
            else:
                cnt = int(index.up_cnt[lc - 1, v])
                ids = index.up_ids[lc - 1, v, :cnt]
            if lc > lv and cnt != 0:
                raise AuditError(f"vertex {v} has edges above its level")
            if cnt and (np.any(ids == v)):
                raise AuditError(f"self-loop at vertex {v} layer {lc}")
            if cnt and len(np.unique(ids)) != cnt:
                raise AuditError(f"duplicate neighbor at vertex {v} layer {lc}")
            for u in ids:
                if index.levels[u] < lc:
                    raise AuditError(
                        f"edge {v}->{u} at layer {lc} but endpoint level "
                        f"{index.levels[u]}")


def layer0_reachability(index: HnswIndex) -> float:
    """Fraction of inserted vertices reachable from the enter point over
    layer-0 edges (undirected BFS is not used; edges as stored)."""
    from collections import deque
    n = index.capacity
    seen = np.zeros(n, dtype=bool)
    dq = deque([index.enter_point])
    seen[index.enter_point] = True
    reached = 1
    while dq:
        v = dq.popleft()
        cnt = int(index.l0_cnt[v])
        for u in index.l0_ids[v, :cnt]:
            if not seen[u]:
                seen[u] = True
                reached += 1
                dq.append(u)
    return reached / max(index.count, 1)
