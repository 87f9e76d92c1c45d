"""Pure-numpy fallback for the hot ray/voxel-grid traversal kernel.

All rays step through the grid in lockstep (amanatides-woo DDA). The
arithmetic mirrors the compiled kernel expression for expression so both
backends return bit-identical intervals.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_BIG = np.inf


def ray_grid_intervals(origins, dirs, grid_origin, spacing, dims, occupancy):
    """Tightest t-interval covering the occupied voxels each ray traverses.

    origins, dirs: (N, 3) float64, dirs need not be normalized
    occupancy: (nx, ny, nz) uint8/bool, C-contiguous
    returns (hit (N,) bool, t_near (N,), t_far (N,)); t_near clamped at 0.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    grid_origin = np.asarray(grid_origin, dtype=np.float64).reshape(3)
    dims = np.asarray(dims, dtype=np.int64).reshape(3)
    occ = np.ascontiguousarray(occupancy) != 0
    n = len(origins)

    lo = grid_origin
    hi = grid_origin + spacing * dims

    # slab test per axis; zero direction components handled by +-inf.
    # divide directly (not via a reciprocal) to match the compiled
    # kernel's rounding bit for bit
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = np.where(dirs != 0.0, (lo - origins) / dirs, _BIG)
        tb = np.where(dirs != 0.0, (hi - origins) / dirs, _BIG)
    tmin_ax = np.minimum(ta, tb)
    tmax_ax = np.maximum(ta, tb)
    # rays parallel to an axis outside that slab miss the box
    parallel_out = (dirs == 0.0) & ((origins < lo) | (origins > hi))
    t0 = np.maximum(np.where(dirs == 0.0, -_BIG, tmin_ax).max(axis=1), 0.0)
    t1 = np.where(dirs == 0.0, _BIG, tmax_ax).min(axis=1)
    inside_box = (t1 >= t0) & ~parallel_out.any(axis=1)

    entry = origins + t0[:, None] * dirs
    voxel = np.floor((entry - grid_origin) / spacing).astype(np.int64)
    voxel = np.clip(voxel, 0, dims - 1)

    step = np.where(dirs > 0.0, 1, np.where(dirs < 0.0, -1, 0)).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        tdelta = np.where(dirs != 0.0, spacing / np.abs(dirs), _BIG)
        next_boundary = grid_origin + spacing * (voxel + (step > 0))
        tmax = np.where(dirs != 0.0, (next_boundary - origins) / dirs, _BIG)

    hit = np.zeros(n, dtype=bool)
    t_near = np.full(n, _BIG)
    t_far = np.full(n, -_BIG)
    active = inside_box.copy()
    t_enter = t0.copy()

    max_steps = int(dims.sum()) + 3
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        vi = voxel[idx]
        occ_here = occ[vi[:, 0], vi[:, 1], vi[:, 2]]
        t_exit = tmax[idx].min(axis=1)
        occ_idx = idx[occ_here]
        t_near[occ_idx] = np.minimum(t_near[occ_idx], t_enter[occ_idx])
        t_far[occ_idx] = np.maximum(t_far[occ_idx], np.minimum(t_exit[occ_here], t1[occ_idx]))
        hit[occ_idx] = True
        # advance along the axis with the smallest tmax (first on ties)
        axis = np.argmin(tmax[idx], axis=1)
        t_enter[idx] = tmax[idx, axis]
        voxel[idx, axis] += step[idx, axis]
        tmax[idx, axis] += tdelta[idx, axis]
        out = (voxel[idx, axis] < 0) | (voxel[idx, axis] >= dims[axis])
        past = t_enter[idx] > t1[idx]
        active[idx[out | past]] = False

    t_near = np.maximum(t_near, 0.0)
    return hit, np.where(hit, t_near, 0.0), np.where(hit, t_far, 0.0)
