# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ray/voxel-grid traversal kernel (amanatides-woo DDA).

Expression-for-expression equivalent to the numpy fallback in
_pykernels.py; the parity test asserts bit-identical outputs.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, INFINITY

cnp.import_array()

BACKEND = "cython"


def ray_grid_intervals(origins, dirs, grid_origin, spacing, dims, occupancy):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] o_arr = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d_arr = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] go_arr = np.asarray(grid_origin, dtype=np.float64).reshape(3)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] dims_arr = np.asarray(dims, dtype=np.int64).reshape(3)
    cdef cnp.ndarray[cnp.uint8_t, ndim=3] occ = np.ascontiguousarray(occupancy).astype(np.uint8)

    cdef Py_ssize_t n = o_arr.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] hit = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t_near = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t_far = np.zeros(n, dtype=np.float64)

    cdef double s = spacing
    cdef double lo0 = go_arr[0], lo1 = go_arr[1], lo2 = go_arr[2]
    cdef long nx = dims_arr[0], ny = dims_arr[1], nz = dims_arr[2]
    cdef double hi0 = lo0 + s * nx, hi1 = lo1 + s * ny, hi2 = lo2 + s * nz
    cdef long max_steps = nx + ny + nz + 3

    cdef Py_ssize_t r
    cdef double ox, oy, oz, dx, dy, dz
    cdef double t0, t1, ta, tb, tn, tf, t_enter, t_exit
    cdef double tmax0, tmax1, tmax2, td0, td1, td2, ex, ey, ez
    cdef long v0, v1, v2, s0, s1, s2, axis, step_i
    cdef bint miss, found

    for r in range(n):
        ox = o_arr[r, 0]; oy = o_arr[r, 1]; oz = o_arr[r, 2]
        dx = d_arr[r, 0]; dy = d_arr[r, 1]; dz = d_arr[r, 2]
        t0 = -INFINITY
        t1 = INFINITY
        miss = False

        if dx == 0.0:
            if ox < lo0 or ox > hi0:
                miss = True
        else:
            ta = (lo0 - ox) / dx; tb = (hi0 - ox) / dx
            if ta < tb:
                if ta > t0: t0 = ta
                if tb < t1: t1 = tb
            else:
                if tb > t0: t0 = tb
                if ta < t1: t1 = ta
        if dy == 0.0:
            if oy < lo1 or oy > hi1:
                miss = True
        else:
            ta = (lo1 - oy) / dy; tb = (hi1 - oy) / dy
            if ta < tb:
                if ta > t0: t0 = ta
                if tb < t1: t1 = tb
            else:
                if tb > t0: t0 = tb
                if ta < t1: t1 = ta
        if dz == 0.0:
            if oz < lo2 or oz > hi2:
                miss = True
        else:
            ta = (lo2 - oz) / dz; tb = (hi2 - oz) / dz
            if ta < tb:
                if ta > t0: t0 = ta
                if tb < t1: t1 = tb
            else:
                if tb > t0: t0 = tb
                if ta < t1: t1 = ta

        if t0 < 0.0:
            t0 = 0.0
        if miss or t1 < t0:
            continue

        ex = ox + t0 * dx; ey = oy + t0 * dy; ez = oz + t0 * dz
        v0 = <long>floor((ex - lo0) / s)
        v1 = <long>floor((ey - lo1) / s)
        v2 = <long>floor((ez - lo2) / s)
        if v0 < 0: v0 = 0
        if v0 > nx - 1: v0 = nx - 1
        if v1 < 0: v1 = 0
        if v1 > ny - 1: v1 = ny - 1
        if v2 < 0: v2 = 0
        if v2 > nz - 1: v2 = nz - 1

        s0 = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
        s1 = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
        s2 = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)
        td0 = s / (dx if dx > 0.0 else -dx) if dx != 0.0 else INFINITY
        td1 = s / (dy if dy > 0.0 else -dy) if dy != 0.0 else INFINITY
        td2 = s / (dz if dz > 0.0 else -dz) if dz != 0.0 else INFINITY
        tmax0 = (lo0 + s * (v0 + (1 if s0 > 0 else 0)) - ox) / dx if dx != 0.0 else INFINITY
        tmax1 = (lo1 + s * (v1 + (1 if s1 > 0 else 0)) - oy) / dy if dy != 0.0 else INFINITY
        tmax2 = (lo2 + s * (v2 + (1 if s2 > 0 else 0)) - oz) / dz if dz != 0.0 else INFINITY

        found = False
        tn = INFINITY
        tf = -INFINITY
        t_enter = t0

        for step_i in range(max_steps):
            if occ[v0, v1, v2]:
                t_exit = tmax0
                if tmax1 < t_exit: t_exit = tmax1
                if tmax2 < t_exit: t_exit = tmax2
                if t_exit > t1: t_exit = t1
                if t_enter < tn: tn = t_enter
                if t_exit > tf: tf = t_exit
                found = True
            # first axis with the smallest tmax
            if tmax0 <= tmax1 and tmax0 <= tmax2:
                axis = 0
            elif tmax1 <= tmax2:
                axis = 1
            else:
                axis = 2
            if axis == 0:
                t_enter = tmax0; v0 += s0; tmax0 += td0
                if v0 < 0 or v0 >= nx: break
            elif axis == 1:
                t_enter = tmax1; v1 += s1; tmax1 += td1
                if v1 < 0 or v1 >= ny: break
            else:
                t_enter = tmax2; v2 += s2; tmax2 += td2
                if v2 < 0 or v2 >= nz: break
            if t_enter > t1:
                break

        if found:
            hit[r] = 1
            t_near[r] = tn if tn > 0.0 else 0.0
            t_far[r] = tf

    return hit.astype(bool), t_near, t_far
