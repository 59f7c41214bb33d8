"""Pure-Python kernel backend.

Inputs mirror the compiled backend: sorted int64 id arrays, unique for token
sets and with repeats for n-gram bags. All outputs are exact integer counts.
"""

from __future__ import annotations

from collections import Counter

import numpy as np


def intersect_count(a: np.ndarray, b: np.ndarray) -> int:
    """|a ∩ b| for sorted unique id arrays."""
    return int(np.intersect1d(a, b, assume_unique=True).size)


def pairwise_intersect_counts(sets: list[np.ndarray]) -> np.ndarray:
    """Intersection sizes for all unordered pairs, (i, j) with i < j in order."""
    m = len(sets)
    as_sets = [set(arr.tolist()) for arr in sets]
    out = np.empty(m * (m - 1) // 2, dtype=np.int64)
    pos = 0
    for i in range(m - 1):
        for j in range(i + 1, m):
            out[pos] = len(as_sets[i] & as_sets[j])
            pos += 1
    return out


def clipped_match_count(cand: np.ndarray, ref: np.ndarray) -> int:
    """Sum over distinct ids of min(count in cand, count in ref)."""
    matched = Counter(cand.tolist()) & Counter(ref.tolist())
    return sum(matched.values())


def pairwise_clipped_matches(bags: list[np.ndarray]) -> np.ndarray:
    """Clipped match counts for all ordered pairs (i, j), i != j, row-major."""
    m = len(bags)
    counters = [Counter(arr.tolist()) for arr in bags]
    out = np.empty(m * (m - 1), dtype=np.int64)
    pos = 0
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            out[pos] = sum((counters[i] & counters[j]).values())
            pos += 1
    return out
