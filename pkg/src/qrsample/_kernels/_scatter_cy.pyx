# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled scatter-add kernels for the sparse embedding hot loop."""

import numpy as np

COMPILED = True


def scatter_rows_dense(long long[::1] targets, double[::1] scales,
                       double[:, ::1] block, double[:, ::1] out):
    cdef Py_ssize_t i, j, t
    cdef Py_ssize_t n = targets.shape[0]
    cdef Py_ssize_t d = block.shape[1]
    cdef double s
    for i in range(n):
        t = targets[i]
        s = scales[i]
        for j in range(d):
            out[t, j] += s * block[i, j]


def scatter_entries_sparse(long long[::1] entry_targets, double[::1] entry_scales,
                           int[::1] cols, double[::1] vals, double[:, ::1] out):
    cdef Py_ssize_t k
    cdef Py_ssize_t m = entry_targets.shape[0]
    for k in range(m):
        out[entry_targets[k], cols[k]] += entry_scales[k] * vals[k]
