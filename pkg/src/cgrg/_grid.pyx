# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled cell-grid edge kernel for fixed-radius neighbour search.

Bins points into a grid with cell side >= max radius, then checks only
pairs in neighbouring cells (with wrap-around on the torus).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def grid_edges(points_in, colours_in, radii_in, bint torus):
    cdef double[:, ::1] points = np.ascontiguousarray(points_in, dtype=np.float64)
    cdef long long[::1] colours = np.ascontiguousarray(colours_in, dtype=np.int64)
    cdef double[:, ::1] radii_sq = np.ascontiguousarray(radii_in, dtype=np.float64) ** 2

    cdef Py_ssize_t n = points.shape[0]
    cdef int d = points.shape[1]
    cdef double rmax = float(np.max(radii_in))
    if n < 2 or rmax <= 0.0:
        return np.empty((0, 2), dtype=np.int64)

    cdef long m = <long>(1.0 / rmax)
    cdef long cap = <long>(np.ceil((8.0 * n) ** (1.0 / d)))
    if cap < m:
        m = cap
    if m < 3:
        return _brute(points, colours, radii_sq, torus, n, d)

    cdef long ncells = 1
    cdef int axis
    for axis in range(d):
        ncells *= m

    # cell id per point (row-major in axis order)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cell_np = np.zeros(n, dtype=np.int64)
    cdef long long[::1] cell = cell_np
    cdef Py_ssize_t i
    cdef long c, stride
    for i in range(n):
        c = 0
        stride = 1
        for axis in range(d):
            v = <long>(points[i, axis] * m)
            if v >= m:
                v = m - 1
            c += v * stride
            stride *= m
        cell[i] = c

    # counting sort of point indices by cell
    cdef cnp.ndarray[cnp.int64_t, ndim=1] start_np = np.zeros(ncells + 1, dtype=np.int64)
    cdef long long[::1] start = start_np
    for i in range(n):
        start[cell[i] + 1] += 1
    cdef long t
    for t in range(ncells):
        start[t + 1] += start[t]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] order_np = np.empty(n, dtype=np.int64)
    cdef long long[::1] order = order_np
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cursor_np = start_np[:ncells].copy()
    cdef long long[::1] cursor = cursor_np
    for i in range(n):
        order[cursor[cell[i]]] = i
        cursor[cell[i]] += 1

    # 3^d neighbour offsets
    cdef int noff = 1
    for axis in range(d):
        noff *= 3
    cdef cnp.ndarray[cnp.int64_t, ndim=2] off_np = np.empty((noff, d), dtype=np.int64)
    cdef long long[:, ::1] off = off_np
    cdef int o, rem
    for o in range(noff):
        rem = o
        for axis in range(d):
            off[o, axis] = (rem % 3) - 1
            rem //= 3

    cdef long capacity = 4 * n + 16
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ei_np = np.empty(capacity, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ej_np = np.empty(capacity, dtype=np.int64)
    cdef long long[::1] ei = ei_np
    cdef long long[::1] ej = ej_np
    cdef long nedges = 0

    cdef long nb, digit, v2
    cdef bint valid, same
    cdef Py_ssize_t pa, pb, u, w
    cdef double dist_sq, delta
    cdef long a0, a1, b0, b1

    for c in range(ncells):
        a0 = start[c]
        a1 = start[c + 1]
        if a0 == a1:
            continue
        for o in range(noff):
            nb = 0
            stride = 1
            valid = True
            same = True
            rem = 0
            for axis in range(d):
                digit = (c // stride) % m
                v2 = digit + off[o, axis]
                if off[o, axis] != 0:
                    same = False
                if torus:
                    v2 = (v2 + m) % m
                elif v2 < 0 or v2 >= m:
                    valid = False
                    break
                nb += v2 * stride
                stride *= m
            if not valid:
                continue
            if same:
                # within-cell pairs
                for u in range(a0, a1):
                    pa = order[u]
                    for w in range(u + 1, a1):
                        pb = order[w]
                        dist_sq = 0.0
                        for axis in range(d):
                            delta = fabs(points[pa, axis] - points[pb, axis])
                            if torus and delta > 0.5:
                                delta = 1.0 - delta
                            dist_sq += delta * delta
                        if dist_sq <= radii_sq[colours[pa], colours[pb]]:
                            if nedges == capacity:
                                capacity *= 2
                                ei_np = np.resize(ei_np, capacity)
                                ej_np = np.resize(ej_np, capacity)
                                ei = ei_np
                                ej = ej_np
                            ei[nedges] = pa
                            ej[nedges] = pb
                            nedges += 1
            elif nb > c:
                b0 = start[nb]
                b1 = start[nb + 1]
                if b0 == b1:
                    continue
                for u in range(a0, a1):
                    pa = order[u]
                    for w in range(b0, b1):
                        pb = order[w]
                        dist_sq = 0.0
                        for axis in range(d):
                            delta = fabs(points[pa, axis] - points[pb, axis])
                            if torus and delta > 0.5:
                                delta = 1.0 - delta
                            dist_sq += delta * delta
                        if dist_sq <= radii_sq[colours[pa], colours[pb]]:
                            if nedges == capacity:
                                capacity *= 2
                                ei_np = np.resize(ei_np, capacity)
                                ej_np = np.resize(ej_np, capacity)
                                ei = ei_np
                                ej = ej_np
                            ei[nedges] = pa
                            ej[nedges] = pb
                            nedges += 1

    return _canonical(ei_np[:nedges], ej_np[:nedges])


cdef _brute(double[:, ::1] points, long long[::1] colours, double[:, ::1] radii_sq,
            bint torus, Py_ssize_t n, int d):
    cdef list acc_i = []
    cdef list acc_j = []
    cdef Py_ssize_t i, j
    cdef int axis
    cdef double dist_sq, delta
    for i in range(n):
        for j in range(i + 1, n):
            dist_sq = 0.0
            for axis in range(d):
                delta = fabs(points[i, axis] - points[j, axis])
                if torus and delta > 0.5:
                    delta = 1.0 - delta
                dist_sq += delta * delta
            if dist_sq <= radii_sq[colours[i], colours[j]]:
                acc_i.append(i)
                acc_j.append(j)
    return _canonical(
        np.asarray(acc_i, dtype=np.int64), np.asarray(acc_j, dtype=np.int64)
    )


def _canonical(ei, ej):
    if len(ei) == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.minimum(ei, ej)
    hi = np.maximum(ei, ej)
    order = np.lexsort((hi, lo))
    return np.stack([lo[order], hi[order]], axis=1).astype(np.int64)
