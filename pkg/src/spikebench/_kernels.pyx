# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Semantics mirror ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def lockout_select(const cnp.int64_t[:] order, Py_ssize_t n, Py_ssize_t lockout):
    cdef Py_ssize_t m = order.shape[0]
    cdef cnp.uint8_t[:] blocked = np.zeros(n, dtype=np.uint8)
    keep_arr = np.zeros(m, dtype=np.bool_)
    cdef cnp.npy_bool[:] keep = keep_arr
    cdef Py_ssize_t i, j, t, lo, hi
    for i in range(m):
        t = order[i]
        if blocked[t]:
            continue
        keep[i] = 1
        lo = t - lockout + 1
        if lo < 0:
            lo = 0
        hi = t + lockout
        if hi > n:
            hi = n
        for j in range(lo, hi):
            blocked[j] = 1
    return keep_arr


def greedy_match(const cnp.int64_t[:] gt, const cnp.int64_t[:] det, double tol):
    cdef Py_ssize_t ng = gt.shape[0], nd = det.shape[0]
    cdef cnp.uint8_t[:] used = np.zeros(ng, dtype=np.uint8)
    gt_idx_arr = np.full(nd, -1, dtype=np.int64)
    cdef cnp.int64_t[:] gt_idx = gt_idx_arr
    cdef Py_ssize_t lo = 0, i, j, best
    cdef double d, diff, best_diff
    for i in range(nd):
        d = <double>det[i]
        while lo < ng and <double>gt[lo] < d - tol:
            lo += 1
        best = -1
        best_diff = 0.0
        j = lo
        while j < ng and <double>gt[j] <= d + tol:
            if not used[j]:
                diff = <double>gt[j] - d
                if diff < 0:
                    diff = -diff
                if best < 0 or diff < best_diff:
                    best = j
                    best_diff = diff
            j += 1
        if best >= 0:
            used[best] = 1
            gt_idx[i] = best
    return gt_idx_arr


def scatter_templates(double[:] out, const cnp.int64_t[:] starts, const double[:] amps, const double[:] shape):
    cdef Py_ssize_t n = out.shape[0], m = starts.shape[0], length = shape.shape[0]
    cdef Py_ssize_t i, k, s, k0, k1
    cdef double a
    for i in range(m):
        s = starts[i]
        a = amps[i]
        k0 = 0 if s >= 0 else -s
        k1 = length if s + length <= n else n - s
        for k in range(k0, k1):
            out[s + k] += a * shape[k]
