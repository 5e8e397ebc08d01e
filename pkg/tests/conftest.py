import numpy as np
import pytest

from graphknn import MetricKind, VectorSet, generate_uniform


@pytest.fixture
def small_set():
    return generate_uniform(200, 8, seed=11)


@pytest.fixture
def tiny_2d():
    rng = np.random.default_rng(3)
    return VectorSet(rng.random((60, 2), dtype=np.float32))


def quadratic_knn_oracle(data: np.ndarray, queries: np.ndarray, k: int,
                         metric=MetricKind.L2):
    """Independent double-loop exact k-NN (ties by ascending id)."""
    import math
    nq, n = queries.shape[0], data.shape[0]
    ids = np.zeros((nq, k), dtype=np.int64)
    dists = np.zeros((nq, k), dtype=np.float64)
    for qi in range(nq):
        pairs = []
        for ci in range(n):
            if metric is MetricKind.L2:
                s = 0.0
                for t in range(data.shape[1]):
                    diff = float(queries[qi, t]) - float(data[ci, t])
                    s += diff * diff
                d = math.sqrt(s)
            else:
                dot = na = nb = 0.0
                for t in range(data.shape[1]):
                    a, b = float(queries[qi, t]), float(data[ci, t])
                    dot += a * b
                    na += a * a
                    nb += b * b
                d = 1.0 - dot / math.sqrt(na * nb)
            pairs.append((np.float32(d), ci))
        pairs.sort()
        ids[qi] = [p[1] for p in pairs[:k]]
        dists[qi] = [p[0] for p in pairs[:k]]
    return ids, dists
