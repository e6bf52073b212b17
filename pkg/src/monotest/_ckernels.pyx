# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in _pykernels."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double TOL_RATIO = 1e-12


cdef Py_ssize_t _lower(const long long[:] s, long long v, Py_ssize_t lo, Py_ssize_t hi):
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if s[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def interval_collisions(sorted_samples, starts, ends):
    cdef const long long[:] s = np.ascontiguousarray(sorted_samples, dtype=np.int64)
    cdef const long long[:] a = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const long long[:] b = np.ascontiguousarray(ends, dtype=np.int64)
    cdef Py_ssize_t m = a.shape[0], n = s.shape[0]
    counts_arr = np.zeros(m, dtype=np.int64)
    pairs_arr = np.zeros(m, dtype=np.int64)
    cdef long long[:] counts = counts_arr
    cdef long long[:] pairs = pairs_arr
    cdef Py_ssize_t k, i, left, right
    cdef long long run, total
    for k in range(m):
        left = _lower(s, a[k], 0, n)
        right = _lower(s, b[k] + 1, left, n)
        counts[k] = right - left
        total = 0
        run = 1
        for i in range(left + 1, right):
            if s[i] == s[i - 1]:
                run += 1
            else:
                total += run * (run - 1) // 2
                run = 1
        if right > left:
            total += run * (run - 1) // 2
        pairs[k] = total
    return counts_arr, pairs_arr


def fixup_weights(double[:] w, const double[:] r):
    cdef Py_ssize_t ell = w.shape[0]
    cdef Py_ssize_t it, i, j, k
    cdef double delta, cap, take
    for it in range(ell * ell + 1):
        i = -1
        for k in range(1, ell):
            if w[k] > r[k - 1] * w[k - 1] + TOL_RATIO:
                i = k
                break
        if i < 0:
            return np.asarray(w)
        delta = 0.0
        cap = w[i]
        j = i - 1
        while j >= 0:
            cap = cap / r[j]
            if w[j] >= cap:
                break
            delta += cap - w[j]
            w[j] = cap
            j -= 1
        k = ell - 1
        while delta > 0 and k >= 0:
            take = delta if delta < w[k] else w[k]
            w[k] -= take
            delta -= take
            k -= 1
    raise RuntimeError("fixup did not converge")
