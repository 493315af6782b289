# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: integer dilation/contraction for Morton codes and
exact voxel ray traversal. Mirrors the API of the pure-Python module."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

BACKEND = "compiled"

cdef cnp.uint64_t MASK21 = 0x1FFFFF
cdef cnp.uint64_t M1 = 0x1F00000000FFFF
cdef cnp.uint64_t M2 = 0x1F0000FF0000FF
cdef cnp.uint64_t M3 = 0x100F00F00F00F00F
cdef cnp.uint64_t M4 = 0x10C30C30C30C30C3
cdef cnp.uint64_t M5 = 0x1249249249249249


cdef inline cnp.uint64_t _spread(cnp.uint64_t v) nogil:
    v &= MASK21
    v = (v | (v << 32)) & M1
    v = (v | (v << 16)) & M2
    v = (v | (v << 8)) & M3
    v = (v | (v << 4)) & M4
    v = (v | (v << 2)) & M5
    return v


cdef inline cnp.uint64_t _compact(cnp.uint64_t v) nogil:
    v &= M5
    v = (v | (v >> 2)) & M4
    v = (v | (v >> 4)) & M3
    v = (v | (v >> 8)) & M2
    v = (v | (v >> 16)) & M1
    v = (v | (v >> 32)) & MASK21
    return v


def morton_encode(kx, ky, kz):
    return int(_spread(<cnp.uint64_t> kx)
               | (_spread(<cnp.uint64_t> ky) << 1)
               | (_spread(<cnp.uint64_t> kz) << 2))


def morton_decode(code):
    cdef cnp.uint64_t c = <cnp.uint64_t> code
    return int(_compact(c)), int(_compact(c >> 1)), int(_compact(c >> 2))


def morton_encode_batch(kx, ky, kz):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] x = np.ascontiguousarray(kx, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] y = np.ascontiguousarray(ky, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] z = np.ascontiguousarray(kz, dtype=np.uint64)
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(n, dtype=np.uint64)
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = _spread(x[i]) | (_spread(y[i]) << 1) | (_spread(z[i]) << 2)
    return out


def morton_decode_batch(codes):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] c = np.ascontiguousarray(codes, dtype=np.uint64)
    cdef Py_ssize_t n = c.shape[0]
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] x = np.empty(n, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] y = np.empty(n, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] z = np.empty(n, dtype=np.uint64)
    cdef Py_ssize_t i
    for i in range(n):
        x[i] = _compact(c[i])
        y[i] = _compact(c[i] >> 1)
        z[i] = _compact(c[i] >> 2)
    return x, y, z


def trace_cells(double ox, double oy, double oz,
                double ex, double ey, double ez,
                long cx0, long cy0, long cz0,
                long cx1, long cy1, long cz1):
    """Cells strictly between the start and end cells of a segment.

    Coordinates are in grid frame (cell size 1); (c*0) and (c*1) are the
    integer start/end cells. Returns an (N, 3) int64 array in order of
    increasing ray parameter.
    """
    cdef long cur[3]
    cdef long end[3]
    cdef long step[3]
    cdef double o[3]
    cdef double d[3]
    cdef double t_max[3]
    cdef double t_delta[3]
    cur[0] = cx0; cur[1] = cy0; cur[2] = cz0
    end[0] = cx1; end[1] = cy1; end[2] = cz1
    o[0] = ox; o[1] = oy; o[2] = oz
    d[0] = ex - ox; d[1] = ey - oy; d[2] = ez - oz

    cdef long n = 0
    cdef int j
    for j in range(3):
        n += (end[j] - cur[j]) if end[j] >= cur[j] else (cur[j] - end[j])
        step[j] = 0
        t_max[j] = INFINITY
        t_delta[j] = INFINITY
        if d[j] > 0:
            step[j] = 1
            t_delta[j] = 1.0 / d[j]
            t_max[j] = (cur[j] + 1 - o[j]) / d[j]
            if t_max[j] < 0:
                t_max[j] = 0
        elif d[j] < 0:
            step[j] = -1
            t_delta[j] = -1.0 / d[j]
            t_max[j] = (cur[j] - o[j]) / d[j]
            if t_max[j] < 0:
                t_max[j] = 0

    cdef cnp.ndarray[cnp.int64_t, ndim=2] out = np.empty((n if n > 0 else 0, 3), dtype=np.int64)
    cdef Py_ssize_t count = 0
    cdef long k
    cdef int axis
    cdef double best
    for k in range(n):
        axis = -1
        best = INFINITY
        for j in range(3):
            if cur[j] != end[j] and t_max[j] < best:
                best = t_max[j]
                axis = j
        if axis < 0:
            break
        cur[axis] += step[axis]
        t_max[axis] += t_delta[axis]
        if cur[0] == end[0] and cur[1] == end[1] and cur[2] == end[2]:
            break
        out[count, 0] = cur[0]
        out[count, 1] = cur[1]
        out[count, 2] = cur[2]
        count += 1
    return out[:count]
