# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_pykernels`` for contracts."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdlib cimport qsort

cnp.import_array()

ctypedef cnp.int64_t i64


cdef int _cmp_i64(const void* a, const void* b) noexcept nogil:
    cdef i64 x = (<i64*>a)[0]
    cdef i64 y = (<i64*>b)[0]
    return (x > y) - (x < y)


def bool_spgemm(a_ptr, a_idx, b_ptr, b_idx, Py_ssize_t n_cols):
    cdef i64[::1] ap = np.ascontiguousarray(a_ptr, dtype=np.int64)
    cdef i64[::1] ai = np.ascontiguousarray(a_idx, dtype=np.int64)
    cdef i64[::1] bp = np.ascontiguousarray(b_ptr, dtype=np.int64)
    cdef i64[::1] bi = np.ascontiguousarray(b_idx, dtype=np.int64)
    cdef Py_ssize_t n_rows = ap.shape[0] - 1
    cdef i64[::1] marker = np.full(max(n_cols, 1), -1, dtype=np.int64)
    cdef i64[::1] out_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    cdef Py_ssize_t cap = max(16, ai.shape[0] + bi.shape[0])
    out = np.empty(cap, dtype=np.int64)
    cdef i64[::1] oi = out
    cdef Py_ssize_t i, p, q, k, j, nnz = 0, row_start
    for i in range(n_rows):
        row_start = nnz
        for p in range(ap[i], ap[i + 1]):
            k = ai[p]
            for q in range(bp[k], bp[k + 1]):
                j = bi[q]
                if marker[j] != i:
                    marker[j] = i
                    if nnz >= cap:
                        cap *= 2
                        out = np.resize(out, cap)
                        oi = out
                    oi[nnz] = j
                    nnz += 1
        if nnz - row_start > 1:
            qsort(&oi[row_start], nnz - row_start, sizeof(i64), _cmp_i64)
        out_ptr[i + 1] = nnz
    return np.asarray(out_ptr), out[:nnz].copy()


def segment_sum(values, seg_ids, Py_ssize_t n_seg):
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef i64[::1] s = np.ascontiguousarray(seg_ids, dtype=np.int64)
    out = np.zeros((n_seg, v.shape[1]))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t e, c, n_cols = v.shape[1]
    for e in range(v.shape[0]):
        for c in range(n_cols):
            o[s[e], c] += v[e, c]
    return out


def segment_max(values, seg_ids, Py_ssize_t n_seg):
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef i64[::1] s = np.ascontiguousarray(seg_ids, dtype=np.int64)
    out = np.zeros((n_seg, v.shape[1]))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t e, c, n_cols = v.shape[1]
    cdef i64 prev = -1
    for e in range(v.shape[0]):
        if s[e] != prev:
            prev = s[e]
            for c in range(n_cols):
                o[prev, c] = v[e, c]
        else:
            for c in range(n_cols):
                if v[e, c] > o[prev, c]:
                    o[prev, c] = v[e, c]
    return out


def scatter_add_rows(values, idx, Py_ssize_t n_rows):
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef i64[::1] ix = np.ascontiguousarray(idx, dtype=np.int64)
    out = np.zeros((n_rows, v.shape[1]))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t e, c, n_cols = v.shape[1]
    for e in range(v.shape[0]):
        for c in range(n_cols):
            o[ix[e], c] += v[e, c]
    return out


def polyline_min_dist(points, verts, ptr):
    cdef double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cdef double[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64).reshape(-1, 2)
    cdef i64[::1] pt = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef Py_ssize_t n_pts = P.shape[0], n_lines = pt.shape[0] - 1
    out = np.zeros((n_pts, n_lines))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double ax, ay, abx, aby, denom, t, cx, cy, dx, dy, d, best
    for i in range(n_pts):
        for j in range(n_lines):
            best = -1.0
            for k in range(pt[j], pt[j + 1] - 1):
                ax = V[k, 0]
                ay = V[k, 1]
                abx = V[k + 1, 0] - ax
                aby = V[k + 1, 1] - ay
                denom = abx * abx + aby * aby
                t = ((P[i, 0] - ax) * abx + (P[i, 1] - ay) * aby) / denom
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                cx = ax + t * abx
                cy = ay + t * aby
                dx = P[i, 0] - cx
                dy = P[i, 1] - cy
                d = sqrt(dx * dx + dy * dy)
                if best < 0.0 or d < best:
                    best = d
            o[i, j] = best
    return out
