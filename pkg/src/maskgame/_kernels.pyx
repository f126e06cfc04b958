# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: row grouping, grouped argmax and exploit matching."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.string cimport memcmp

cnp.import_array()


cdef inline uint64_t _row_hash(const signed char* row, Py_ssize_t d) nogil:
    # FNV-1a
    cdef uint64_t h = 1469598103934665603ULL
    cdef Py_ssize_t j
    for j in range(d):
        h ^= <unsigned char>row[j]
        h *= 1099511628211ULL
    return h


def group_rows(rows):
    rows = np.ascontiguousarray(rows, dtype=np.int8)
    cdef Py_ssize_t M = rows.shape[0]
    cdef Py_ssize_t d = rows.shape[1]
    inverse_arr = np.empty(M, dtype=np.intp)
    if M == 0:
        return inverse_arr, np.zeros(0, dtype=np.intp)
    cdef const signed char[:, ::1] R = rows
    cdef Py_ssize_t[::1] inverse = inverse_arr
    cdef Py_ssize_t size = 1
    while size < 2 * M:
        size <<= 1
    cdef uint64_t mask = size - 1
    table_arr = np.full(size, -1, dtype=np.intp)
    first_arr = np.empty(M, dtype=np.intp)
    cdef Py_ssize_t[::1] table = table_arr
    cdef Py_ssize_t[::1] first = first_arr
    cdef Py_ssize_t i, g, slot, n_groups = 0
    cdef const signed char* row
    cdef const signed char* base = &R[0, 0] if d > 0 else NULL
    with nogil:
        for i in range(M):
            row = base + i * d
            slot = <Py_ssize_t>(_row_hash(row, d) & mask)
            while True:
                g = table[slot]
                if g < 0:
                    table[slot] = n_groups
                    first[n_groups] = i
                    inverse[i] = n_groups
                    n_groups += 1
                    break
                if d == 0 or memcmp(base + first[g] * d, row, d) == 0:
                    inverse[i] = g
                    break
                slot = (slot + 1) & mask
    return inverse_arr, first_arr[:n_groups].copy()


def group_argmax(inverse, weights, Py_ssize_t n_groups):
    inv_arr = np.ascontiguousarray(inverse, dtype=np.intp)
    w_arr = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t M = w_arr.shape[0]
    cdef Py_ssize_t E = w_arr.shape[1]
    cdef const Py_ssize_t[::1] inv = inv_arr
    cdef const double[:, ::1] W = w_arr
    sums_arr = np.zeros((n_groups, E), dtype=np.float64)
    cdef double[:, ::1] S = sums_arr
    choice_arr = np.zeros(n_groups, dtype=np.intp)
    best_arr = np.zeros(n_groups, dtype=np.float64)
    cdef Py_ssize_t[::1] choice = choice_arr
    cdef double[::1] best = best_arr
    cdef Py_ssize_t i, e, g, arg
    cdef double top
    with nogil:
        for i in range(M):
            g = inv[i]
            for e in range(E):
                S[g, e] += W[i, e]
        if E > 0:
            for g in range(n_groups):
                arg = 0
                top = S[g, 0]
                for e in range(1, E):
                    if S[g, e] > top:
                        top = S[g, e]
                        arg = e
                choice[g] = arg
                best[g] = top
    return choice_arr, best_arr


def match_table(X, allowed):
    x_arr = np.ascontiguousarray(X, dtype=np.int8)
    a_arr = np.ascontiguousarray(allowed, dtype=np.uint8)
    cdef Py_ssize_t K = x_arr.shape[0]
    cdef Py_ssize_t n = x_arr.shape[1]
    cdef Py_ssize_t E = a_arr.shape[0]
    cdef const signed char[:, ::1] Xv = x_arr
    cdef const unsigned char[:, :, ::1] A = a_arr
    out_arr = np.zeros((K, E), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t k, e, i
    cdef unsigned char ok
    with nogil:
        for k in range(K):
            for e in range(E):
                ok = 1
                for i in range(n):
                    if not A[e, i, Xv[k, i] + 1]:
                        ok = 0
                        break
                out[k, e] = ok
    return out_arr
