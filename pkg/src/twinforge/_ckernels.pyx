# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-cell kernels; same API as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

BACKEND = "cython"

cdef double SIGN_TOL = 1e-12


cdef inline void _cof(const double[:, :] m, double* c) noexcept nogil:
    cdef int i, j, i1, i2, j1, j2
    for i in range(3):
        i1 = (i + 1) % 3
        i2 = (i + 2) % 3
        for j in range(3):
            j1 = (j + 1) % 3
            j2 = (j + 2) % 3
            c[3 * i + j] = m[i1, j1] * m[i2, j2] - m[i1, j2] * m[i2, j1]


def det_batch(M):
    cdef double[:, :, ::1] m = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t N = m.shape[0], k
    out = np.empty(N, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for k in range(N):
            o[k] = (m[k, 0, 0] * (m[k, 1, 1] * m[k, 2, 2] - m[k, 1, 2] * m[k, 2, 1])
                    - m[k, 0, 1] * (m[k, 1, 0] * m[k, 2, 2] - m[k, 1, 2] * m[k, 2, 0])
                    + m[k, 0, 2] * (m[k, 1, 0] * m[k, 2, 1] - m[k, 1, 1] * m[k, 2, 0]))
    return out


def cofactor_batch(M):
    cdef double[:, :, ::1] m = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t N = m.shape[0], k
    cdef int i, j
    cdef double c[9]
    out = np.empty((N, 3, 3), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for k in range(N):
            _cof(m[k], c)
            for i in range(3):
                for j in range(3):
                    o[k, i, j] = c[3 * i + j]
    return out


def rank_one_fit_batch(M):
    cdef double[:, :, ::1] m = np.ascontiguousarray(M, dtype=np.float64)
    cdef Py_ssize_t N = m.shape[0], k
    a_out = np.empty((N, 3), dtype=np.float64)
    n_out = np.empty((N, 3), dtype=np.float64)
    d_out = np.empty(N, dtype=np.float64)
    cdef double[:, ::1] A = a_out
    cdef double[:, ::1] Nn = n_out
    cdef double[::1] Dv = d_out
    cdef double g[3][3]
    cdef double c[9]
    cdef double v[3]
    cdef double s, tr, piv, nrm
    cdef int i, j, l, p, first
    with nogil:
        for k in range(N):
            for i in range(3):
                for j in range(3):
                    s = 0.0
                    for l in range(3):
                        s = s + m[k, l, i] * m[k, l, j]
                    g[i][j] = s
            tr = g[0][0] + g[1][1] + g[2][2]
            if not (tr > 0.0):
                v[0] = 1.0
                v[1] = 0.0
                v[2] = 0.0
            else:
                p = 0
                if g[1][1] > g[p][p]:
                    p = 1
                if g[2][2] > g[p][p]:
                    p = 2
                piv = sqrt(g[p][p])
                for j in range(3):
                    v[j] = g[p][j] / piv
                nrm = sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
                for j in range(3):
                    v[j] = v[j] / nrm
                first = 0
                while first < 2 and fabs(v[first]) <= SIGN_TOL:
                    first = first + 1
                if v[first] < 0.0:
                    for j in range(3):
                        v[j] = -v[j]
            for i in range(3):
                s = 0.0
                for j in range(3):
                    s = s + m[k, i, j] * v[j]
                A[k, i] = s
                Nn[k, i] = v[i]
            _cof(m[k], c)
            s = 0.0
            for i in range(9):
                s = s + c[i] * c[i]
            Dv[k] = sqrt(s)
    return a_out, n_out, d_out


def orient_signs(n, active):
    cdef double[:, :, :, ::1] nv = np.ascontiguousarray(n, dtype=np.float64)
    cdef cnp.uint8_t[:, :, ::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef Py_ssize_t nx = act.shape[0], ny = act.shape[1], nz = act.shape[2]
    cdef Py_ssize_t total = nx * ny * nz
    signs_arr = np.ones((nx, ny, nz), dtype=np.int8)
    seen_arr = np.zeros((nx, ny, nz), dtype=np.uint8)
    queue_arr = np.empty(total if total > 0 else 1, dtype=np.intp)
    cdef cnp.int8_t[:, :, ::1] signs = signs_arr
    cdef cnp.uint8_t[:, :, ::1] seen = seen_arr
    cdef Py_ssize_t[::1] queue = queue_arr
    cdef Py_ssize_t head, tail, flat, i, j, kk, a, b, c, d, seed
    cdef int di[6]
    cdef int dj[6]
    cdef int dk[6]
    cdef double dot
    di[:] = [1, -1, 0, 0, 0, 0]
    dj[:] = [0, 0, 1, -1, 0, 0]
    dk[:] = [0, 0, 0, 0, 1, -1]
    with nogil:
        for seed in range(total):
            i = seed // (ny * nz)
            j = (seed // nz) % ny
            kk = seed % nz
            if not act[i, j, kk] or seen[i, j, kk]:
                continue
            seen[i, j, kk] = 1
            head = 0
            tail = 0
            queue[tail] = seed
            tail = tail + 1
            while head < tail:
                flat = queue[head]
                head = head + 1
                i = flat // (ny * nz)
                j = (flat // nz) % ny
                kk = flat % nz
                for d in range(6):
                    a = i + di[d]
                    b = j + dj[d]
                    c = kk + dk[d]
                    if a < 0 or a >= nx or b < 0 or b >= ny or c < 0 or c >= nz:
                        continue
                    if seen[a, b, c] or not act[a, b, c]:
                        continue
                    seen[a, b, c] = 1
                    dot = signs[i, j, kk] * (nv[i, j, kk, 0] * nv[a, b, c, 0]
                                             + nv[i, j, kk, 1] * nv[a, b, c, 1]
                                             + nv[i, j, kk, 2] * nv[a, b, c, 2])
                    if dot < 0.0:
                        signs[a, b, c] = -1
                    queue[tail] = (a * ny + b) * nz + c
                    tail = tail + 1
    return signs_arr
