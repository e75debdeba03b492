# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled sparse hot kernels (CSR spmm, edge softmax, boolean spgemm).

Mirrors the signatures of ``bgnn._knumpy``; selected automatically at import
by ``bgnn.backend`` when built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, INFINITY
from libc.stdlib cimport qsort

cnp.import_array()

NAME = "cython"


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef long long x = (<const long long*> a)[0]
    cdef long long y = (<const long long*> b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


def spmm(object indptr, object indices, object values, object dense):
    cdef const cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] ci = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[:, ::1] x = np.ascontiguousarray(dense, dtype=np.float64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    cdef Py_ssize_t d = x.shape[1]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef const double[::1] vals
    cdef Py_ssize_t v, e, j, k
    cdef double w
    if values is None:
        with nogil:
            for v in range(n):
                for e in range(ip[v], ip[v + 1]):
                    j = ci[e]
                    for k in range(d):
                        out[v, k] += x[j, k]
    else:
        vals = np.ascontiguousarray(values, dtype=np.float64)
        with nogil:
            for v in range(n):
                for e in range(ip[v], ip[v + 1]):
                    j = ci[e]
                    w = vals[e]
                    for k in range(d):
                        out[v, k] += w * x[j, k]
    return out_arr


def segment_sum(object indptr, object edge_vals):
    cdef const cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const double[::1] ev = np.ascontiguousarray(edge_vals, dtype=np.float64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t v, e
    cdef double acc
    with nogil:
        for v in range(n):
            acc = 0.0
            for e in range(ip[v], ip[v + 1]):
                acc += ev[e]
            out[v] = acc
    return out_arr


def edge_softmax(object indptr, object scores):
    cdef const cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const double[::1] s = np.ascontiguousarray(scores, dtype=np.float64)
    cdef Py_ssize_t nnz = s.shape[0]
    cdef Py_ssize_t n = ip.shape[0] - 1
    out_arr = np.empty(nnz, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t v, e
    cdef double m, denom
    with nogil:
        for v in range(n):
            if ip[v] == ip[v + 1]:
                continue
            m = -INFINITY
            for e in range(ip[v], ip[v + 1]):
                if s[e] > m:
                    m = s[e]
            denom = 0.0
            for e in range(ip[v], ip[v + 1]):
                out[e] = exp(s[e] - m)
                denom += out[e]
            for e in range(ip[v], ip[v + 1]):
                out[e] /= denom
    return out_arr


def edge_softmax_backward(object indptr, object alpha, object d_alpha):
    cdef const cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const double[::1] a = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef const double[::1] da = np.ascontiguousarray(d_alpha, dtype=np.float64)
    out_arr = np.empty(a.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t n = ip.shape[0] - 1
    cdef Py_ssize_t v, e
    cdef double inner
    with nogil:
        for v in range(n):
            inner = 0.0
            for e in range(ip[v], ip[v + 1]):
                inner += a[e] * da[e]
            for e in range(ip[v], ip[v + 1]):
                out[e] = a[e] * (da[e] - inner)
    return out_arr


def edge_rowcol_dot(object row_of_edge, object indices, object a, object b):
    cdef const cnp.int64_t[::1] rows = np.ascontiguousarray(row_of_edge, dtype=np.int64)
    cdef const cnp.int64_t[::1] cols = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[:, ::1] am = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bm = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t nnz = rows.shape[0]
    cdef Py_ssize_t d = am.shape[1]
    out_arr = np.empty(nnz, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t e, k, r, c
    cdef double acc
    with nogil:
        for e in range(nnz):
            r = rows[e]
            c = cols[e]
            acc = 0.0
            for k in range(d):
                acc += am[r, k] * bm[c, k]
            out[e] = acc
    return out_arr


def spgemm_bool(Py_ssize_t n, object indptr_a, object indices_a,
                object indptr_b, object indices_b):
    """Structure of A @ B by Gustavson's algorithm; sorted unique columns."""
    cdef const cnp.int64_t[::1] ipa = np.ascontiguousarray(indptr_a, dtype=np.int64)
    cdef const cnp.int64_t[::1] cia = np.ascontiguousarray(indices_a, dtype=np.int64)
    cdef const cnp.int64_t[::1] ipb = np.ascontiguousarray(indptr_b, dtype=np.int64)
    cdef const cnp.int64_t[::1] cib = np.ascontiguousarray(indices_b, dtype=np.int64)

    indptr_c_arr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] ipc = indptr_c_arr
    marker_arr = np.full(n, -1, dtype=np.int64)
    cdef cnp.int64_t[::1] marker = marker_arr

    cdef Py_ssize_t v, e, e2, j, c
    cdef long long cnt
    with nogil:
        for v in range(n):
            cnt = 0
            for e in range(ipa[v], ipa[v + 1]):
                j = cia[e]
                for e2 in range(ipb[j], ipb[j + 1]):
                    c = cib[e2]
                    if marker[c] != v:
                        marker[c] = v
                        cnt += 1
            ipc[v + 1] = ipc[v] + cnt

    indices_c_arr = np.empty(indptr_c_arr[n], dtype=np.int64)
    cdef cnp.int64_t[::1] cic = indices_c_arr
    cdef Py_ssize_t pos
    marker_arr[:] = -1
    with nogil:
        for v in range(n):
            pos = ipc[v]
            for e in range(ipa[v], ipa[v + 1]):
                j = cia[e]
                for e2 in range(ipb[j], ipb[j + 1]):
                    c = cib[e2]
                    if marker[c] != v:
                        marker[c] = v
                        cic[pos] = c
                        pos += 1
            if pos > ipc[v]:
                qsort(&cic[ipc[v]], pos - ipc[v], sizeof(long long), _cmp_i64)
    return indptr_c_arr, indices_c_arr
