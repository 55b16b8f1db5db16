# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled distance kernels for farthest-first and D^2 selection.

Mirrors :mod:`wavefuse._pykernels` exactly. Squared distances are summed
sequentially over coordinates so both backends agree to rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef inline double _sq_dist(const double[:, ::1] a, Py_ssize_t i,
                            const double[:, ::1] b, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t k
    cdef double acc = 0.0, diff
    for k in range(a.shape[1]):
        diff = a[i, k] - b[j, k]
        acc += diff * diff
    return acc


def min_sq_dists(const double[:, ::1] points, const double[:, ::1] centers):
    """Squared distance from each point to its nearest center (inf if none)."""
    cdef Py_ssize_t n = points.shape[0], m = centers.shape[0], i, j
    cdef double d, best
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] mind = out
    if points.shape[1] != centers.shape[1] and m > 0:
        raise ValueError("dimension mismatch between points and centers")
    with nogil:
        for i in range(n):
            best = INFINITY
            for j in range(m):
                d = _sq_dist(points, i, centers, j)
                if d < best:
                    best = d
            mind[i] = best
    return out


def update_min_sq_dists(const double[:, ::1] points, Py_ssize_t center,
                        double[::1] mind):
    """Lower ``mind`` in place with distances to ``points[center]``."""
    cdef Py_ssize_t n = points.shape[0], i
    cdef double d
    with nogil:
        for i in range(n):
            d = _sq_dist(points, i, points, center)
            if d < mind[i]:
                mind[i] = d


def farthest_first(const double[:, ::1] points, double[::1] mind, Py_ssize_t b):
    """Greedy farthest-first traversal.

    ``mind`` holds squared distances to the existing centers and is updated
    in place. Ties go to the lowest index; chosen points are never reused.
    """
    cdef Py_ssize_t n = points.shape[0], i, step, best_i
    cdef double best, d
    chosen_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] chosen = chosen_arr
    out = np.empty(b, dtype=np.int64)
    cdef long long[::1] picks = out
    with nogil:
        for step in range(b):
            best_i = -1
            best = -1.0
            for i in range(n):
                if not chosen[i] and mind[i] > best:
                    best = mind[i]
                    best_i = i
            chosen[best_i] = 1
            picks[step] = best_i
            for i in range(n):
                d = _sq_dist(points, i, points, best_i)
                if d < mind[i]:
                    mind[i] = d
    return out
