"""Splitmix64 stream used inside compiled kernels.

A tiny explicit-state generator keeps every kernel deterministic for a
given seed without depending on numba's global RNG state.
"""

import numpy as np
from numba import njit, uint64

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


@njit(cache=True, inline="always")
def rng_next(state):
    """Advance the 1-element uint64 state array, return the next draw."""
    state[0] = state[0] + _GAMMA
    z = state[0]
    z = (z ^ (z >> uint64(30))) * _MUL1
    z = (z ^ (z >> uint64(27))) * _MUL2
    return z ^ (z >> uint64(31))


@njit(cache=True, inline="always")
def rng_below(state, n):
    return np.int64(rng_next(state) % np.uint64(n))


@njit(cache=True, inline="always")
def rng_float(state):
    return (rng_next(state) >> uint64(11)) * (1.0 / 9007199254740992.0)


def make_state(seed: int) -> np.ndarray:
    return np.array([np.uint64(seed & _MASK)], dtype=np.uint64)


def derive_seed(global_seed: int, index: int) -> int:
    """Stable per-query seed from a global seed and a query index."""
    z = (global_seed + (index + 1) * int(_GAMMA)) & _MASK
    z = ((z ^ (z >> 30)) * int(_MUL1)) & _MASK
    z = ((z ^ (z >> 27)) * int(_MUL2)) & _MASK
    return (z ^ (z >> 31)) & _MASK
