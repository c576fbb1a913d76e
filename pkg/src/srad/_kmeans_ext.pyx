# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled two-centre Lloyd kernel; see ``_kmeans_py`` for the reference."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline double _sqd(const double[:, ::1] X, Py_ssize_t i, const double[::1] c) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc = 0.0, t
    for j in range(X.shape[1]):
        t = X[i, j] - c[j]
        acc += t * t
    return acc


cdef void _seed(const double[:, ::1] X, double u0, double u1, Py_ssize_t* i0, Py_ssize_t* i1,
                double[::1] d2) noexcept nogil:
    cdef Py_ssize_t m = X.shape[0], i, last = -1
    cdef double total = 0.0, target, acc = 0.0
    i0[0] = <Py_ssize_t>(u0 * m)
    if i0[0] > m - 1:
        i0[0] = m - 1
    for i in range(m):
        d2[i] = _sqd(X, i, X[i0[0]])
        total += d2[i]
        if d2[i] > 0:
            last = i
    target = u1 * total
    i1[0] = last
    for i in range(m):
        acc += d2[i]
        if acc > target:
            i1[0] = i
            break


cdef bint _means(const double[:, ::1] X, signed char[::1] labels, double[:, ::1] centers,
                 double[::1] scratch) noexcept nogil:
    """Recompute centers as cluster means; repair an empty cluster. Returns True on repair."""
    cdef Py_ssize_t m = X.shape[0], h = X.shape[1], i, j, far = 0
    cdef Py_ssize_t n0 = 0, n1 = 0, full, empty
    cdef double best = -1.0, dd
    for i in range(m):
        if labels[i]:
            n1 += 1
        else:
            n0 += 1
    for j in range(h):
        centers[0, j] = 0.0
        centers[1, j] = 0.0
    if n0 == 0 or n1 == 0:
        full = 1 if n0 == 0 else 0
        empty = 1 - full
        for i in range(m):
            for j in range(h):
                centers[full, j] += X[i, j]
        for j in range(h):
            centers[full, j] /= m
            scratch[j] = centers[full, j]
        for i in range(m):
            dd = _sqd(X, i, scratch)
            if dd > best:
                best = dd
                far = i
        labels[far] = <signed char>empty
        for j in range(h):
            centers[full, j] = 0.0
        for i in range(m):
            if i != far:
                for j in range(h):
                    centers[full, j] += X[i, j]
        for j in range(h):
            centers[full, j] /= (m - 1)
            centers[empty, j] = X[far, j]
        return True
    for i in range(m):
        for j in range(h):
            centers[labels[i], j] += X[i, j]
    for j in range(h):
        centers[0, j] /= n0
        centers[1, j] /= n1
    return False


cdef double _lloyd(const double[:, ::1] X, Py_ssize_t i0, Py_ssize_t i1, int max_iters, double tol,
                   signed char[::1] labels, double[:, ::1] centers, double[:, ::1] prev,
                   double[::1] scratch) noexcept nogil:
    cdef Py_ssize_t m = X.shape[0], h = X.shape[1], i, j, it
    cdef bint changed, repaired, first = True
    cdef double d0, d1, shift, s, t, sse = 0.0
    cdef signed char lab
    for j in range(h):
        centers[0, j] = X[i0, j]
        centers[1, j] = X[i1, j]
    for it in range(max_iters):
        changed = False
        for i in range(m):
            for j in range(h):
                scratch[j] = centers[0, j]
            d0 = _sqd(X, i, scratch)
            for j in range(h):
                scratch[j] = centers[1, j]
            d1 = _sqd(X, i, scratch)
            lab = 1 if d1 < d0 else 0
            if first or lab != labels[i]:
                changed = True
            labels[i] = lab
        if not changed:
            break
        first = False
        for j in range(h):
            prev[0, j] = centers[0, j]
            prev[1, j] = centers[1, j]
        repaired = _means(X, labels, centers, scratch)
        shift = 0.0
        for i in range(2):
            s = 0.0
            for j in range(h):
                t = centers[i, j] - prev[i, j]
                s += t * t
            if s > shift:
                shift = s
        if not repaired and sqrt(shift) < tol:
            break
    _means(X, labels, centers, scratch)
    for i in range(m):
        for j in range(h):
            scratch[j] = centers[labels[i], j]
        sse += _sqd(X, i, scratch)
    return sse


def lloyd2(X, uniforms, int max_iters, double tol):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t m = Xv.shape[0], h = Xv.shape[1], r, i0 = 0, i1 = 0
    cdef Py_ssize_t restarts = U.shape[0]
    best_labels = np.zeros(m, dtype=np.int8)
    best_centers = np.zeros((2, h), dtype=np.float64)
    all_sse = np.empty(restarts, dtype=np.float64)
    cdef signed char[::1] lab = np.zeros(m, dtype=np.int8)
    cdef signed char[::1] blab = best_labels
    cdef double[:, ::1] cen = np.zeros((2, h), dtype=np.float64)
    cdef double[:, ::1] bcen = best_centers
    cdef double[:, ::1] prev = np.zeros((2, h), dtype=np.float64)
    cdef double[::1] scratch = np.zeros(h, dtype=np.float64)
    cdef double[::1] d2 = np.zeros(m, dtype=np.float64)
    cdef double[::1] sses = all_sse
    cdef double sse, best = -1.0
    with nogil:
        for r in range(restarts):
            _seed(Xv, U[r, 0], U[r, 1], &i0, &i1, d2)
            sse = _lloyd(Xv, i0, i1, max_iters, tol, lab, cen, prev, scratch)
            sses[r] = sse
            if r == 0 or sse < best:
                best = sse
                blab[:] = lab
                bcen[:, :] = cen
    return best_labels, best_centers, best, all_sse
