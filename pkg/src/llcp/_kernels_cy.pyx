# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for packed exponential-sum constraints.

One fused pass per call over the CSR term/tail arrays; semantics match
``_kernels_py`` exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp as c_exp

cnp.import_array()

BACKEND = "compiled"


def constraint_values(pack, double[::1] u, double cap):
    cdef cnp.int64_t[::1] term_cons = pack.term_cons
    cdef cnp.int64_t[::1] a_indptr = pack.a_indptr
    cdef cnp.int64_t[::1] a_idx = pack.a_idx
    cdef double[::1] a_val = pack.a_val
    cdef double[::1] b = pack.b
    cdef cnp.int64_t[::1] f_indptr = pack.f_indptr
    cdef cnp.int64_t[::1] f_idx = pack.f_idx
    cdef double[::1] f_val = pack.f_val
    cdef double[::1] g = pack.g
    cdef Py_ssize_t t = pack.t, m = pack.m
    cdef Py_ssize_t i, j, k
    cdef double z, acc
    cdef double inf = float("inf")

    h_arr = np.empty(m)
    e_arr = np.empty(t)
    cdef double[::1] h = h_arr
    cdef double[::1] e = e_arr

    for i in range(m):
        acc = g[i]
        for j in range(f_indptr[i], f_indptr[i + 1]):
            acc += f_val[j] * u[f_idx[j]]
        h[i] = acc
    for k in range(t):
        z = b[k]
        for j in range(a_indptr[k], a_indptr[k + 1]):
            z += a_val[j] * u[a_idx[j]]
        if z > cap:
            e[k] = c_exp(cap)
            h[term_cons[k]] = inf
        else:
            e[k] = c_exp(z)
            h[term_cons[k]] += e[k]
    return h_arr, e_arr


def constraint_grads(pack, double[::1] u, double[::1] e):
    cdef cnp.int64_t[::1] term_cons = pack.term_cons
    cdef cnp.int64_t[::1] a_indptr = pack.a_indptr
    cdef cnp.int64_t[::1] a_idx = pack.a_idx
    cdef double[::1] a_val = pack.a_val
    cdef cnp.int64_t[::1] f_indptr = pack.f_indptr
    cdef cnp.int64_t[::1] f_idx = pack.f_idx
    cdef double[::1] f_val = pack.f_val
    cdef Py_ssize_t t = pack.t, m = pack.m, n = pack.n
    cdef Py_ssize_t i, j, k, row
    cdef double ek

    g_arr = np.zeros((m, n))
    cdef double[:, ::1] grads = g_arr

    for k in range(t):
        row = term_cons[k]
        ek = e[k]
        for j in range(a_indptr[k], a_indptr[k + 1]):
            grads[row, a_idx[j]] += ek * a_val[j]
    for i in range(m):
        for j in range(f_indptr[i], f_indptr[i + 1]):
            grads[i, f_idx[j]] += f_val[j]
    return g_arr


def scaled_gram(pack, double[::1] w):
    cdef cnp.int64_t[::1] a_indptr = pack.a_indptr
    cdef cnp.int64_t[::1] a_idx = pack.a_idx
    cdef double[::1] a_val = pack.a_val
    cdef Py_ssize_t t = pack.t, n = pack.n
    cdef Py_ssize_t k, ja, jb
    cdef double wk, va

    h_arr = np.zeros((n, n))
    cdef double[:, ::1] h = h_arr

    for k in range(t):
        wk = w[k]
        if wk == 0.0:
            continue
        for ja in range(a_indptr[k], a_indptr[k + 1]):
            va = wk * a_val[ja]
            for jb in range(a_indptr[k], a_indptr[k + 1]):
                h[a_idx[ja], a_idx[jb]] += va * a_val[jb]
    return h_arr
