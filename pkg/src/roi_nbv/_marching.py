"""Exact integer-grid ray marching kernels.

These walk every voxel a segment geometrically intersects (Amanatides-Woo
stepping) over dense grids indexed by voxel key minus a grid origin key.
Lookups outside the grid read as empty / unknown. All kernels share the same
stepping rules, including the tie-break order x before y before z.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Must match voxel_map.VoxelState values.
STATE_UNKNOWN = 0
STATE_FREE = 1
STATE_OCCUPIED = 2


@njit(cache=True)
def _setup_axis(o, d, c, res):
    """Stepping state for one axis: (step, t_next_boundary, t_per_voxel)."""
    if d > 0.0:
        return 1, ((c + 1) * res - o) / d, res / d
    if d < 0.0:
        return -1, (c * res - o) / d, -res / d
    return 0, np.inf, np.inf


@njit(cache=True)
def ray_stats_batch(state, g0, res, starts, dirs, eval_range,
                    field, f0, use_field, max_dist):
    """Per-ray voxel counts for information gain.

    For each unit-direction ray, walks voxels whose entry distance is below
    ``eval_range``, stopping at (and counting) the first Occupied voxel.
    Returns (n_total, n_unknown, w_sum) where w_sum adds, per Unknown voxel,
    0.5 plus a proximity bonus 0.5 * (max_dist - d) / max_dist when the
    distance field value d at that voxel is at most max_dist.
    """
    n = dirs.shape[0]
    n_total = np.zeros(n, np.int64)
    n_unknown = np.zeros(n, np.int64)
    w_sum = np.zeros(n, np.float64)
    nx, ny, nz = state.shape
    fx, fy, fz = field.shape
    for r in range(n):
        ox, oy, oz = starts[r, 0], starts[r, 1], starts[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        i = int(np.floor(ox / res))
        j = int(np.floor(oy / res))
        k = int(np.floor(oz / res))
        step_x, tmax_x, tdelta_x = _setup_axis(ox, dx, i, res)
        step_y, tmax_y, tdelta_y = _setup_axis(oy, dy, j, res)
        step_z, tmax_z, tdelta_z = _setup_axis(oz, dz, k, res)
        t_entry = 0.0
        total = 0
        unknown = 0
        wsum = 0.0
        while t_entry < eval_range:
            ii = i - g0[0]
            jj = j - g0[1]
            kk = k - g0[2]
            s = STATE_UNKNOWN
            if 0 <= ii < nx and 0 <= jj < ny and 0 <= kk < nz:
                s = state[ii, jj, kk]
            total += 1
            if s == STATE_OCCUPIED:
                break
            if s == STATE_UNKNOWN:
                w = 0.5
                if use_field:
                    fi = i - f0[0]
                    fj = j - f0[1]
                    fk = k - f0[2]
                    if 0 <= fi < fx and 0 <= fj < fy and 0 <= fk < fz:
                        d_roi = field[fi, fj, fk]
                        if d_roi <= max_dist:
                            w = 0.5 + 0.5 * (max_dist - d_roi) / max_dist
                unknown += 1
                wsum += w
            if tmax_x <= tmax_y and tmax_x <= tmax_z:
                t_entry = tmax_x
                tmax_x += tdelta_x
                i += step_x
            elif tmax_y <= tmax_z:
                t_entry = tmax_y
                tmax_y += tdelta_y
                j += step_y
            else:
                t_entry = tmax_z
                tmax_z += tdelta_z
                k += step_z
        n_total[r] = total
        n_unknown[r] = unknown
        w_sum[r] = wsum
    return n_total, n_unknown, w_sum


@njit(cache=True)
def occluded_batch(state, g0, res, starts, ends):
    """True per segment when an Occupied voxel lies on it before its endpoint.

    Walks every voxel whose entry distance is below the segment length, so a
    segment ending inside an Occupied voxel also reports True.
    """
    n = starts.shape[0]
    out = np.zeros(n, np.bool_)
    nx, ny, nz = state.shape
    for r in range(n):
        dx = ends[r, 0] - starts[r, 0]
        dy = ends[r, 1] - starts[r, 1]
        dz = ends[r, 2] - starts[r, 2]
        dist = np.sqrt(dx * dx + dy * dy + dz * dz)
        if dist == 0.0:
            continue
        ox, oy, oz = starts[r, 0], starts[r, 1], starts[r, 2]
        ux, uy, uz = dx / dist, dy / dist, dz / dist
        i = int(np.floor(ox / res))
        j = int(np.floor(oy / res))
        k = int(np.floor(oz / res))
        step_x, tmax_x, tdelta_x = _setup_axis(ox, ux, i, res)
        step_y, tmax_y, tdelta_y = _setup_axis(oy, uy, j, res)
        step_z, tmax_z, tdelta_z = _setup_axis(oz, uz, k, res)
        t_entry = 0.0
        while t_entry < dist:
            ii = i - g0[0]
            jj = j - g0[1]
            kk = k - g0[2]
            if 0 <= ii < nx and 0 <= jj < ny and 0 <= kk < nz:
                if state[ii, jj, kk] == STATE_OCCUPIED:
                    out[r] = True
                    break
            if tmax_x <= tmax_y and tmax_x <= tmax_z:
                t_entry = tmax_x
                tmax_x += tdelta_x
                i += step_x
            elif tmax_y <= tmax_z:
                t_entry = tmax_y
                tmax_y += tdelta_y
                j += step_y
            else:
                t_entry = tmax_z
                tmax_z += tdelta_z
                k += step_z
    return out


@njit(cache=True)
def render_depth(cells, g0, res, origin, dirs, min_range, max_range):
    """First filled voxel along each ray, reported at its chord midpoint.

    ``cells`` holds -1 for empty voxels and a non-negative id otherwise. For
    each unit-direction ray from the shared ``origin``, the returned depth is
    (t_entry + t_exit) / 2 of the first filled voxel, or inf when there is no
    hit with midpoint inside [min_range, max_range]. ``hits`` holds the grid
    index of the hit voxel, or -1 per axis.
    """
    n = dirs.shape[0]
    depth = np.full(n, np.inf)
    hits = np.full((n, 3), -1, np.int64)
    nx, ny, nz = cells.shape
    ox, oy, oz = origin[0], origin[1], origin[2]
    for r in range(n):
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        i = int(np.floor(ox / res))
        j = int(np.floor(oy / res))
        k = int(np.floor(oz / res))
        step_x, tmax_x, tdelta_x = _setup_axis(ox, dx, i, res)
        step_y, tmax_y, tdelta_y = _setup_axis(oy, dy, j, res)
        step_z, tmax_z, tdelta_z = _setup_axis(oz, dz, k, res)
        t_entry = 0.0
        while t_entry < max_range:
            ii = i - g0[0]
            jj = j - g0[1]
            kk = k - g0[2]
            if 0 <= ii < nx and 0 <= jj < ny and 0 <= kk < nz and cells[ii, jj, kk] >= 0:
                t_exit = min(tmax_x, min(tmax_y, tmax_z))
                t_mid = 0.5 * (t_entry + t_exit)
                if min_range <= t_mid <= max_range:
                    depth[r] = t_mid
                    hits[r, 0] = ii
                    hits[r, 1] = jj
                    hits[r, 2] = kk
                break
            if tmax_x <= tmax_y and tmax_x <= tmax_z:
                t_entry = tmax_x
                tmax_x += tdelta_x
                i += step_x
            elif tmax_y <= tmax_z:
                t_entry = tmax_y
                tmax_y += tdelta_y
                j += step_y
            else:
                t_entry = tmax_z
                tmax_z += tdelta_z
                k += step_z
    return depth, hits


@njit(cache=True)
def stamp_min_distance(field, f0, keys, offsets, dists):
    """Lower ``field`` to dists[b] at keys[m] + offsets[b] where it helps."""
    for m in range(keys.shape[0]):
        ki = keys[m, 0] - f0[0]
        kj = keys[m, 1] - f0[1]
        kk = keys[m, 2] - f0[2]
        for b in range(offsets.shape[0]):
            fi = ki + offsets[b, 0]
            fj = kj + offsets[b, 1]
            fk = kk + offsets[b, 2]
            if 0 <= fi < field.shape[0] and 0 <= fj < field.shape[1] and 0 <= fk < field.shape[2]:
                if dists[b] < field[fi, fj, fk]:
                    field[fi, fj, fk] = dists[b]
