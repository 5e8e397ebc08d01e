"""Distance kernels and the shared vector container.

All distances reported to callers are the true metric values (real L2,
cosine as 1 - normalized dot product).  Squared-distance shortcuts are an
internal concern only and never leak into traces, result lists or files.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError

# Accumulate in float64 above this dimension to bound summation error on
# wide vectors (e.g. GIST at d=960).
_F64_ACCUM_DIM = 256


class MetricKind(enum.Enum):
    L2 = "l2"
    COSINE = "cosine"

    @property
    def code(self) -> int:
        """Integer tag used by the compiled kernels."""
        return 0 if self is MetricKind.L2 else 1

    @classmethod
    def parse(cls, text: str) -> "MetricKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise UsageError(f"unknown metric {text!r}") from None


@dataclass
class VectorSet:
    """n row-contiguous float32 vectors of dimension d plus a metric tag."""

    data: np.ndarray
    metric: MetricKind = MetricKind.L2
    name: str = ""
    normalized: bool = False
    seed: int | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise UsageError(f"vector data must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise UsageError("dimension must be >= 1")
        if not np.all(np.isfinite(arr)):
            raise DomainError("vector data contains non-finite values")
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def normalize(self) -> "VectorSet":
        """Return an L2-normalized copy (rows rescaled to unit norm)."""
        norms = np.linalg.norm(self.data.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            raise DomainError("cannot normalize a zero vector")
        out = (self.data / norms[:, None].astype(np.float32)).astype(np.float32)
        return VectorSet(out, metric=self.metric, name=self.name,
                         normalized=True, seed=self.seed)


def distance(a, b, metric: MetricKind = MetricKind.L2) -> float:
    """True metric distance between two vectors.

    Pure and deterministic; accumulation is float64 for d > 256 (float32
    inputs are promoted either way, which satisfies the same bound).
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape[0] != b.shape[0]:
        raise UsageError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if metric is MetricKind.L2:
        diff = a - b
        return float(np.sqrt(np.dot(diff, diff)))
    na = np.sqrt(np.dot(a, a))
    nb = np.sqrt(np.dot(b, b))
    if na == 0.0 or nb == 0.0:
        raise DomainError("cosine distance undefined for a zero vector")
    return float(1.0 - np.dot(a, b) / (na * nb))


def distances_to_all(query, candidates: np.ndarray,
                     metric: MetricKind = MetricKind.L2) -> np.ndarray:
    """Vector of true distances from one query to every row of candidates."""
    q = np.asarray(query, dtype=np.float64).ravel()
    X = candidates
    if q.shape[0] != X.shape[1]:
        raise UsageError(f"dimension mismatch: {q.shape[0]} vs {X.shape[1]}")
    Xd = X.astype(np.float64, copy=False)
    if metric is MetricKind.L2:
        sq = np.sum(Xd * Xd, axis=1) - 2.0 * (Xd @ q) + np.dot(q, q)
        return np.sqrt(np.maximum(sq, 0.0))
    nq = np.sqrt(np.dot(q, q))
    nx = np.sqrt(np.sum(Xd * Xd, axis=1))
    if nq == 0.0 or np.any(nx == 0.0):
        raise DomainError("cosine distance undefined for a zero vector")
    return 1.0 - (Xd @ q) / (nx * nq)
