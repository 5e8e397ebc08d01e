"""Compiled primitives shared by the graph builders and searchers.

Distances are always the true metric values (real L2 with the square
root taken, cosine as 1 - cos).  Accumulation is float64 regardless of
dimension, which subsumes the precision requirement for wide vectors.
"""

import numpy as np
from numba import njit, float64

# metric codes; must match MetricKind.code
L2 = 0
COSINE = 1


@njit(cache=True, inline="always")
def dist(x, y, metric_code):
    if metric_code == L2:
        s = 0.0
        for i in range(x.shape[0]):
            t = float64(x[i]) - float64(y[i])
            s += t * t
        return np.sqrt(s)
    dot = 0.0
    nx = 0.0
    ny = 0.0
    for i in range(x.shape[0]):
        a = float64(x[i])
        b = float64(y[i])
        dot += a * b
        nx += a * a
        ny += b * b
    return 1.0 - dot / np.sqrt(nx * ny)


@njit(cache=True)
def full_scan_top1(data, q, metric_code):
    """Exhaustive scan used as the wall-clock speedup denominator."""
    best = np.inf
    best_id = -1
    for i in range(data.shape[0]):
        d = dist(data[i], q, metric_code)
        if d < best:
            best = d
            best_id = i
    return best_id, best


# ---------------------------------------------------------------------------
# Bounded candidate pool: parallel arrays sorted ascending by (dist, id),
# with an expanded flag per slot.  Capacity is len(p_ids); the caller
# tracks the live count.
# ---------------------------------------------------------------------------

@njit(cache=True)
def pool_insert(p_ids, p_dists, p_exp, count, u, d):
    """Sorted insert of (u, d); evicts the worst entry when full.

    Returns the new live count.  Rejects when full and (d, u) is not
    strictly better than the current worst (ties favour lower id).
    """
    cap = p_ids.shape[0]
    if count == cap:
        wd = p_dists[cap - 1]
        wi = p_ids[cap - 1]
        if d > wd or (d == wd and u >= wi):
            return count
    pos = count
    for t in range(count):
        if d < p_dists[t] or (d == p_dists[t] and u < p_ids[t]):
            pos = t
            break
    end = count if count < cap else cap - 1
    for t in range(end, pos, -1):
        p_ids[t] = p_ids[t - 1]
        p_dists[t] = p_dists[t - 1]
        p_exp[t] = p_exp[t - 1]
    p_ids[pos] = u
    p_dists[pos] = d
    p_exp[pos] = 0
    return count if count == cap else count + 1


@njit(cache=True, inline="always")
def pool_first_unexpanded(p_exp, count):
    for t in range(count):
        if p_exp[t] == 0:
            return t
    return -1
