# cython: language_level=3
"""Compiled versions of the kernels in ``_pykernels``.

Same signatures and results; see that module for the documentation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, floor, INFINITY

cnp.import_array()


cdef void _jacobi(double* a, double* v, double* w, Py_ssize_t l) noexcept nogil:
    # cyclic Jacobi on the l x l row-major block a (destroyed); eigenvectors in v columns
    cdef Py_ssize_t i, j, p, q, r, sweep
    cdef double off, tot, apq, theta, t, c, s, arp, arq, vrp, vrq, tmp
    for i in range(l):
        for j in range(l):
            v[i * l + j] = 1.0 if i == j else 0.0
    for sweep in range(64):
        off = 0.0
        tot = 0.0
        for i in range(l):
            for j in range(l):
                tmp = a[i * l + j] * a[i * l + j]
                tot += tmp
                if i != j:
                    off += tmp
        if off <= 1e-32 * tot or off == 0.0:
            break
        for p in range(l - 1):
            for q in range(p + 1, l):
                apq = a[p * l + q]
                if apq == 0.0:
                    continue
                theta = (a[q * l + q] - a[p * l + p]) / (2.0 * apq)
                if fabs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0:
                        t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                a[p * l + p] -= t * apq
                a[q * l + q] += t * apq
                a[p * l + q] = 0.0
                a[q * l + p] = 0.0
                for r in range(l):
                    if r != p and r != q:
                        arp = a[r * l + p]
                        arq = a[r * l + q]
                        a[r * l + p] = c * arp - s * arq
                        a[p * l + r] = a[r * l + p]
                        a[r * l + q] = s * arp + c * arq
                        a[q * l + r] = a[r * l + q]
                    vrp = v[r * l + p]
                    vrq = v[r * l + q]
                    v[r * l + p] = c * vrp - s * vrq
                    v[r * l + q] = s * vrp + c * vrq
    for i in range(l):
        w[i] = a[i * l + i]
    # insertion sort, ascending, carrying columns
    for i in range(1, l):
        j = i
        while j > 0 and w[j - 1] > w[j]:
            tmp = w[j]; w[j] = w[j - 1]; w[j - 1] = tmp
            for r in range(l):
                tmp = v[r * l + j]; v[r * l + j] = v[r * l + j - 1]; v[r * l + j - 1] = tmp
            j -= 1


def sym_eigh(a):
    arr = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t nd = arr.ndim
    batch = tuple(arr.shape)[:nd - 2]
    cdef Py_ssize_t l = arr.shape[nd - 1]
    flat = arr.reshape(-1, l * l).copy()
    cdef double[:, ::1] A = flat
    cdef Py_ssize_t N = A.shape[0], k
    W = np.empty((N, l))
    V = np.empty((N, l * l))
    cdef double[:, ::1] Wv = W
    cdef double[:, ::1] Vv = V
    with nogil:
        for k in range(N):
            _jacobi(&A[k, 0], &Vv[k, 0], &Wv[k, 0], l)
    return W.reshape(batch + (l,)), V.reshape(batch + (l, l))


def stencil_sum(values, shape, centers, offsets, weights):
    cdef const double[:, ::1] vals = np.ascontiguousarray(np.atleast_2d(values), dtype=np.float64)
    cdef const Py_ssize_t[:, ::1] C = np.ascontiguousarray(centers, dtype=np.intp)
    cdef const Py_ssize_t[:, ::1] O = np.ascontiguousarray(offsets, dtype=np.intp)
    cdef const double[::1] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const Py_ssize_t[::1] n = np.asarray(shape, dtype=np.intp)
    cdef Py_ssize_t m = C.shape[1], K = C.shape[0], Q = O.shape[0], V = vals.shape[0]
    cdef Py_ssize_t k, q, j, v, idx, x
    out = np.zeros((V, K))
    cdef double[:, ::1] res = out
    with nogil:
        for k in range(K):
            for q in range(Q):
                idx = 0
                for j in range(m):
                    x = (C[k, j] + O[q, j]) % n[j]
                    if x < 0:
                        x = x + n[j]
                    idx = idx * n[j] + x
                for v in range(V):
                    res[v, k] += wt[q] * vals[v, idx]
    return out


def stencil_max(values, shape, centers, offsets):
    cdef const double[::1] vals = np.ascontiguousarray(values, dtype=np.float64).ravel()
    cdef const Py_ssize_t[:, ::1] C = np.ascontiguousarray(centers, dtype=np.intp)
    cdef const Py_ssize_t[:, ::1] O = np.ascontiguousarray(offsets, dtype=np.intp)
    cdef const Py_ssize_t[::1] n = np.asarray(shape, dtype=np.intp)
    cdef Py_ssize_t m = C.shape[1], K = C.shape[0], Q = O.shape[0]
    cdef Py_ssize_t k, q, j, idx, x, arg
    cdef double b
    best = np.empty(K)
    where = np.empty(K, dtype=np.int64)
    cdef double[::1] bv = best
    cdef cnp.int64_t[::1] wv = where
    with nogil:
        for k in range(K):
            b = -INFINITY
            arg = -1
            for q in range(Q):
                idx = 0
                for j in range(m):
                    x = (C[k, j] + O[q, j]) % n[j]
                    if x < 0:
                        x = x + n[j]
                    idx = idx * n[j] + x
                if vals[idx] > b or arg < 0:
                    b = vals[idx]
                    arg = idx
            bv[k] = b
            wv[k] = arg
    return best, where


cdef inline double _torus_sq(const double[:, ::1] P, Py_ssize_t i, const double[:, ::1] Cc, Py_ssize_t c,
                             Py_ssize_t m, double period) noexcept nogil:
    cdef double s = 0.0, d
    cdef Py_ssize_t j
    for j in range(m):
        d = P[i, j] - Cc[c, j]
        d -= period * floor(d / period + 0.5)
        s += d * d
    return s


def greedy_cover(points, double period, double r):
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t N = P.shape[0], m = P.shape[1] if P.ndim == 2 else 0
    acc = np.empty(N, dtype=np.int64)
    cdef cnp.int64_t[::1] A = acc
    cdef Py_ssize_t i, a, J = 0
    cdef double lim = (2.0 * r) * (2.0 * r)
    cdef bint ok
    with nogil:
        for i in range(N):
            ok = True
            for a in range(J):
                if _torus_sq(P, i, P, A[a], m, period) <= lim:
                    ok = False
                    break
            if ok:
                A[J] = i
                J += 1
    return acc[:J].copy()


def min_sq_distance(points, centers, double period):
    cdef const double[:, ::1] P = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] Cc = np.ascontiguousarray(np.atleast_2d(centers), dtype=np.float64)
    cdef Py_ssize_t N = P.shape[0], J = Cc.shape[0], m = P.shape[1]
    out = np.full(N, np.inf)
    cdef double[::1] o = out
    cdef Py_ssize_t i, c
    cdef double d
    if Cc.shape[1] != m:
        J = 0
    with nogil:
        for i in range(N):
            for c in range(J):
                d = _torus_sq(P, i, Cc, c, m, period)
                if d < o[i]:
                    o[i] = d
    return out
