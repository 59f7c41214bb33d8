# cython: language_level=3
"""Compiled kernel backend: merge walks over sorted int64 id arrays.

The pairwise entry points pack all arrays into one flat buffer with offsets
so the O(m^2) loop runs without touching Python objects.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


cdef Py_ssize_t _intersect(const i64[:] a, const i64[:] b) nogil:
    cdef Py_ssize_t i = 0, j = 0, hits = 0
    cdef Py_ssize_t la = a.shape[0], lb = b.shape[0]
    while i < la and j < lb:
        if a[i] < b[j]:
            i += 1
        elif a[i] > b[j]:
            j += 1
        else:
            hits += 1
            i += 1
            j += 1
    return hits


cdef Py_ssize_t _clipped(const i64[:] c, const i64[:] r) nogil:
    # Arrays are sorted with repeats; walk runs of equal ids and clip counts.
    cdef Py_ssize_t i = 0, j = 0, total = 0
    cdef Py_ssize_t lc = c.shape[0], lr = r.shape[0]
    cdef Py_ssize_t run_c, run_r
    cdef i64 value
    while i < lc and j < lr:
        if c[i] < r[j]:
            i += 1
        elif c[i] > r[j]:
            j += 1
        else:
            value = c[i]
            run_c = 0
            run_r = 0
            while i < lc and c[i] == value:
                run_c += 1
                i += 1
            while j < lr and r[j] == value:
                run_r += 1
                j += 1
            total += run_c if run_c < run_r else run_r
    return total


cdef _flatten(arrays):
    """Concatenate into (flat buffer, offsets); both contiguous int64."""
    cdef Py_ssize_t m = len(arrays)
    offsets = np.zeros(m + 1, dtype=np.int64)
    converted = []
    cdef Py_ssize_t i
    for i in range(m):
        arr = np.ascontiguousarray(arrays[i], dtype=np.int64)
        converted.append(arr)
        offsets[i + 1] = offsets[i] + arr.shape[0]
    if m == 0 or offsets[m] == 0:
        flat = np.empty(0, dtype=np.int64)
    else:
        flat = np.concatenate(converted)
    return flat, offsets


def intersect_count(a, b):
    """|a ∩ b| for sorted unique id arrays."""
    cdef const i64[:] va = np.ascontiguousarray(a, dtype=np.int64)
    cdef const i64[:] vb = np.ascontiguousarray(b, dtype=np.int64)
    return _intersect(va, vb)


def pairwise_intersect_counts(sets):
    """Intersection sizes for all unordered pairs, (i, j) with i < j in order."""
    cdef Py_ssize_t m = len(sets)
    flat_np, offsets_np = _flatten(sets)
    cdef const i64[:] flat = flat_np
    cdef const i64[:] offs = offsets_np
    out = np.empty(m * (m - 1) // 2, dtype=np.int64)
    cdef i64[:] vout = out
    cdef Py_ssize_t i, j, pos = 0
    with nogil:
        for i in range(m - 1):
            for j in range(i + 1, m):
                vout[pos] = _intersect(
                    flat[offs[i]:offs[i + 1]], flat[offs[j]:offs[j + 1]]
                )
                pos += 1
    return out


def clipped_match_count(cand, ref):
    """Sum over distinct ids of min(count in cand, count in ref)."""
    cdef const i64[:] vc = np.ascontiguousarray(cand, dtype=np.int64)
    cdef const i64[:] vr = np.ascontiguousarray(ref, dtype=np.int64)
    return _clipped(vc, vr)


def pairwise_clipped_matches(bags):
    """Clipped match counts for all ordered pairs (i, j), i != j, row-major."""
    cdef Py_ssize_t m = len(bags)
    flat_np, offsets_np = _flatten(bags)
    cdef const i64[:] flat = flat_np
    cdef const i64[:] offs = offsets_np
    out = np.empty(m * (m - 1), dtype=np.int64)
    cdef i64[:] vout = out
    cdef Py_ssize_t i, j, pos = 0
    with nogil:
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                vout[pos] = _clipped(
                    flat[offs[i]:offs[i + 1]], flat[offs[j]:offs[j + 1]]
                )
                pos += 1
    return out
