# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def move_toward(double[::1] x, double[::1] y, const double[::1] wx,
                const double[::1] wy, const double[::1] speed, double dt):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double dx, dy, dist, step, frac
    arrived = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] out = arrived
    for i in range(n):
        dx = wx[i] - x[i]
        dy = wy[i] - y[i]
        dist = sqrt(dx * dx + dy * dy)
        step = speed[i] * dt
        if dist <= step:
            x[i] = wx[i]
            y[i] = wy[i]
            out[i] = 1
        else:
            frac = step / dist
            x[i] = x[i] + dx * frac
            y[i] = y[i] + dy * frac
    return arrived


def neighbor_csr(const double[::1] x, const double[::1] y, double radio_range):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, j, e, m = 0
    cdef double dx, dy, r2 = radio_range * radio_range
    cdef Py_ssize_t max_pairs = n * (n - 1) // 2
    cdef cnp.int32_t[::1] pa = np.empty(max(max_pairs, 1), dtype=np.int32)
    cdef cnp.int32_t[::1] pb = np.empty(max(max_pairs, 1), dtype=np.int32)
    indptr_arr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] indptr = indptr_arr
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx * dx + dy * dy <= r2:
                pa[m] = <cnp.int32_t>i
                pb[m] = <cnp.int32_t>j
                m += 1
                indptr[i + 1] += 1
                indptr[j + 1] += 1
    for i in range(n):
        indptr[i + 1] += indptr[i]
    indices_arr = np.empty(indptr[n], dtype=np.int32)
    cdef cnp.int32_t[::1] indices = indices_arr
    cdef cnp.int64_t[::1] fill = np.zeros(n, dtype=np.int64)
    # pairs are in lexicographic order, so every row fills ascending
    for e in range(m):
        i = pa[e]
        j = pb[e]
        indices[indptr[i] + fill[i]] = <cnp.int32_t>j
        fill[i] += 1
        indices[indptr[j] + fill[j]] = <cnp.int32_t>i
        fill[j] += 1
    return indptr_arr, indices_arr


def active_weight_sums(const double[::1] weights, const cnp.uint8_t[:, ::1] bits):
    cdef Py_ssize_t rows = bits.shape[0], cols = bits.shape[1]
    cdef Py_ssize_t i, j
    cdef double s
    out_arr = np.zeros(rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(rows):
        s = 0.0
        for j in range(cols):
            if bits[i, j]:
                s += weights[j]
        out[i] = s
    return out_arr


cdef inline bint _in_trace(cnp.int32_t v, const cnp.int32_t[::1] trace) noexcept nogil:
    cdef Py_ssize_t t
    for t in range(trace.shape[0]):
        if trace[t] == v:
            return True
    return False


def rreq_targets(const cnp.int32_t[::1] nbrs, const cnp.uint8_t[::1] eligible,
                 const cnp.int32_t[::1] trace):
    cdef Py_ssize_t i, m = 0
    cdef cnp.int32_t v
    out_arr = np.empty(nbrs.shape[0], dtype=np.int32)
    cdef cnp.int32_t[::1] out = out_arr
    for i in range(nbrs.shape[0]):
        v = nbrs[i]
        if eligible[v] and not _in_trace(v, trace):
            out[m] = v
            m += 1
    return out_arr[:m]


def rreq_admit(const cnp.int32_t[::1] receivers, const cnp.int32_t[::1] trace, int destination,
               const cnp.uint8_t[::1] eligible, cnp.int8_t[::1] count,
               cnp.int32_t[:, ::1] prevs, int limit):
    cdef Py_ssize_t i, s, m = 0, discards = 0
    cdef cnp.int32_t v, prev = trace[trace.shape[0] - 1]
    cdef bint dup
    out_arr = np.empty(receivers.shape[0], dtype=np.int32)
    cdef cnp.int32_t[::1] out = out_arr
    for i in range(receivers.shape[0]):
        v = receivers[i]
        if not eligible[v] or _in_trace(v, trace):
            discards += 1
            continue
        if v == destination:
            out[m] = v
            m += 1
            continue
        dup = False
        for s in range(count[v]):
            if prevs[v, s] == prev:
                dup = True
                break
        if dup or count[v] >= limit:
            discards += 1
            continue
        prevs[v, count[v]] = prev
        count[v] += 1
        out[m] = v
        m += 1
    return out_arr[:m], discards
