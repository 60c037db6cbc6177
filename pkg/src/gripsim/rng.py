"""Deterministic, counter-based random streams.

Every randomized operation in gripsim derives an independent Philox stream
from a tuple of integers (seed, purpose tag, vertex id, ...) mixed through
splitmix64. Identical tuples always give identical streams, so all outputs
are pure functions of their seed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Fixed tags keep unrelated streams (sampling, features, weights, ...) apart.
TAG_SAMPLE = 0x5A4D
TAG_FEATURES = 0xFEA7
TAG_WEIGHTS = 0x3E16
TAG_GRAPH = 0x6A04
TAG_ROOTS = 0x0075


def mix64(*values: int) -> int:
    """splitmix64 finalizer folded over the inputs."""
    h = 0x9E3779B97F4A7C15
    for v in values:
        h = (h ^ (int(v) & _MASK64)) * 0xBF58476D1CE4E5B9 & _MASK64
        h = (h ^ (h >> 27)) * 0x94D049BB133111EB & _MASK64
        h = h ^ (h >> 31)
    return h


def stream(*key: int) -> np.random.Generator:
    """A Philox generator keyed by the mixed input tuple."""
    return np.random.Generator(np.random.Philox(key=mix64(*key)))


def sample_without_replacement(rng: np.random.Generator, pool: np.ndarray, k: int) -> np.ndarray:
    """Uniform k-subset by partial Fisher-Yates (O(len(pool)) copy, O(k) draws).

    Implemented locally so the draw sequence does not depend on numpy's
    internal choice algorithm.
    """
    n = len(pool)
    if k >= n:
        return pool.copy()
    work = pool.copy()
    for i in range(k):
        j = int(rng.integers(i, n))
        work[i], work[j] = work[j], work[i]
    return work[:k]
