"""Viewpoint evaluation: information-gain metrics, movement cost and utility.

Both gain metrics walk the same rays with the same stopping rule: voxels are
counted from the pose along each ray while their entry distance is below
``eval_range``, stopping at (and counting) the first Occupied voxel. The
unobserved-voxel metric averages the unknown fraction per ray; the proximity
metric weights each Unknown voxel by its distance to the nearest ROI voxel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _marching
from .geometry import ViewPose, fov_direction_grid
from .sampling import Candidate
from .voxel_map import RoiMap

_MAX_FIELD_CELLS = 200_000_000


class UtilType(Enum):
    UNOBSERVED = "unobserved"
    PROXIMITY = "proximity"


@dataclass(frozen=True)
class EvalParams:
    """Gain flavor, proximity radius, cost weight and ray length."""

    util_type: UtilType = UtilType.UNOBSERVED
    max_dist: float = 0.1
    alpha: float = 0.05
    eval_range: float = 2.0
    utility_threshold: float = 0.2

    def __post_init__(self):
        if not isinstance(self.util_type, UtilType):
            raise ValueError(f"unknown util_type {self.util_type!r}")
        if not (self.max_dist > 0.0 and math.isfinite(self.max_dist)):
            raise ValueError("max_dist must be positive")
        if self.alpha < 0.0:
            raise ValueError("alpha must be non-negative")
        if not (self.eval_range > 0.0 and math.isfinite(self.eval_range)):
            raise ValueError("eval_range must be positive")


@dataclass(eq=False)
class RayGrid:
    """Fixed bundle of unit ray directions (camera frame) used for gain."""

    directions: np.ndarray

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=np.float64)
        if self.directions.ndim != 3 or self.directions.shape[2] != 3:
            raise ValueError("directions must have shape (rows, cols, 3)")
        norms = np.linalg.norm(self.directions, axis=2)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("ray directions must be unit length")
        if (self.directions[..., 2] <= 0.0).any():
            raise ValueError("ray directions must point forward (+z)")

    @classmethod
    def from_camera(cls, camera, rows: int = 15, cols: int = 20) -> "RayGrid":
        """Evenly subsample the camera FOV; 20 x 15 rays by default."""
        return cls(fov_direction_grid(camera.fov_h_deg, camera.fov_v_deg, cols, rows))

    @property
    def count(self) -> int:
        return self.directions.shape[0] * self.directions.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return np.ascontiguousarray(self.directions.reshape(-1, 3))


class RoiDistanceField:
    """Dense truncated field of exact Euclidean center distances to ROI voxels.

    Built by stamping the sphere of voxel offsets with distance <= max_dist
    around every ROI voxel, keeping the minimum; cells farther than max_dist
    from every ROI voxel (or outside the stamped grid) read as inf.
    """

    def __init__(self, resolution: float, max_dist: float, roi_keys: np.ndarray):
        if not (resolution > 0.0 and max_dist > 0.0):
            raise ValueError("resolution and max_dist must be positive")
        self.resolution = float(resolution)
        self.max_dist = float(max_dist)
        roi_keys = np.asarray(roi_keys, dtype=np.int64).reshape(-1, 3)
        if len(roi_keys) == 0:
            self.origin = np.zeros(3, dtype=np.int64)
            self.grid = np.empty((0, 0, 0), dtype=np.float64)
            return
        reach = int(self.max_dist / self.resolution)
        span = np.arange(-reach, reach + 1, dtype=np.int64)
        oi, oj, ok = np.meshgrid(span, span, span, indexing="ij")
        offsets = np.stack([oi.ravel(), oj.ravel(), ok.ravel()], axis=1)
        dists = np.sqrt((offsets.astype(np.float64) ** 2).sum(axis=1)) * self.resolution
        keep = dists <= self.max_dist
        offsets, dists = offsets[keep], dists[keep]
        self.origin = roi_keys.min(axis=0) - reach
        shape = roi_keys.max(axis=0) - roi_keys.min(axis=0) + 2 * reach + 1
        if int(np.prod(shape)) > _MAX_FIELD_CELLS:
            raise ValueError(f"distance field grid too large: {tuple(shape)}")
        self.grid = np.full(tuple(shape), np.inf, dtype=np.float64)
        _marching.stamp_min_distance(self.grid, self.origin, roi_keys, offsets, dists)

    def query_key_array(self, keys: np.ndarray) -> np.ndarray:
        """Distance per key; inf where no ROI voxel lies within max_dist."""
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
        out = np.full(len(keys), np.inf)
        if self.grid.size == 0 or len(keys) == 0:
            return out
        idx = keys - self.origin
        inside = ((idx >= 0) & (idx < np.asarray(self.grid.shape))).all(axis=1)
        sel = idx[inside]
        out[inside] = self.grid[sel[:, 0], sel[:, 1], sel[:, 2]]
        return out

    def query(self, key) -> float | None:
        value = float(self.query_key_array(np.asarray(key).reshape(1, 3))[0])
        return None if math.isinf(value) else value


def nearest_roi_distance(vm: RoiMap, key, max_dist: float = 0.1) -> float | None:
    """Center-to-center distance to the nearest ROI voxel, or None beyond
    ``max_dist``. Scans the map's ROI set directly."""
    if not max_dist > 0.0:
        raise ValueError("max_dist must be positive")
    roi_keys = vm.roi_key_array()
    if len(roi_keys) == 0:
        return None
    delta = roi_keys - np.asarray(key, dtype=np.int64)
    best = float(np.sqrt((delta.astype(np.float64) ** 2).sum(axis=1)).min()) * vm.resolution
    return best if best <= max_dist else None


def proximity_weight(dist: float, max_dist: float) -> float:
    """Linear weight in [0.5, 1]: 1 at a ROI voxel, 0.5 at max_dist."""
    if not max_dist > 0.0:
        raise ValueError("max_dist must be positive")
    if not (0.0 <= dist <= max_dist):
        raise ValueError(f"dist must lie in [0, max_dist], got {dist}")
    return 0.5 + 0.5 * (max_dist - dist) / max_dist


def move_cost(current: ViewPose, candidate: ViewPose) -> float:
    """Euclidean distance between the two camera positions, meters."""
    return float(np.linalg.norm(current.position - candidate.position))


def utility(ig: float, cost: float, alpha: float) -> float:
    """Scalar viewpoint score: information gain minus weighted travel cost."""
    return ig - alpha * cost


_EMPTY_FIELD = np.empty((0, 0, 0), dtype=np.float64)
_ZERO3 = np.zeros(3, dtype=np.int64)


def _pose_ray_stats(snap, positions, rotations, rays: RayGrid, eval_range, field, max_dist):
    """Kernel wrapper: per (pose, ray) voxel counts, shaped (poses, rays)."""
    n_poses = len(positions)
    n_rays = rays.count
    dirs_world = np.einsum("rj,mij->mri", rays.flat, rotations)
    starts = np.repeat(np.asarray(positions, dtype=np.float64), n_rays, axis=0)
    use_field = field is not None and field.grid.size > 0
    n_total, n_unknown, w_sum = _marching.ray_stats_batch(
        snap.state,
        snap.origin,
        snap.resolution,
        np.ascontiguousarray(starts),
        np.ascontiguousarray(dirs_world.reshape(-1, 3)),
        eval_range,
        field.grid if use_field else _EMPTY_FIELD,
        field.origin if use_field else _ZERO3,
        use_field,
        max_dist,
    )
    shape = (n_poses, n_rays)
    return n_total.reshape(shape), n_unknown.reshape(shape), w_sum.reshape(shape)


def _ray_means(numerator, n_total):
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(n_total > 0, numerator / n_total, 0.0)
    return ratio.mean(axis=1)


def ig_unobserved(vm: RoiMap, pose: ViewPose, rays: RayGrid, eval_range: float) -> float:
    """Mean unknown-voxel fraction over the ray bundle."""
    if not eval_range > 0.0:
        raise ValueError("eval_range must be positive")
    snap = vm.snapshot()
    n_total, n_unknown, _ = _pose_ray_stats(
        snap, pose.position[None, :], pose.rotation[None, :, :], rays, eval_range, None, 1.0
    )
    return float(_ray_means(n_unknown.astype(np.float64), n_total)[0])


def ig_proximity(vm: RoiMap, pose: ViewPose, rays: RayGrid, params: EvalParams) -> float:
    """Mean ROI-proximity-weighted unknown mass over the ray bundle.

    Unknown voxels weigh 0.5, raised linearly up to 1.0 within
    ``params.max_dist`` of a ROI voxel; known voxels weigh 0.
    """
    snap = vm.snapshot()
    field = RoiDistanceField(vm.resolution, params.max_dist, vm.roi_key_array())
    n_total, _, w_sum = _pose_ray_stats(
        snap,
        pose.position[None, :],
        pose.rotation[None, :, :],
        rays,
        params.eval_range,
        field,
        params.max_dist,
    )
    return float(_ray_means(w_sum, n_total)[0])


@dataclass(eq=False)
class EvaluatedCandidate:
    """A candidate with its gain, travel cost and combined utility."""

    candidate: Candidate
    ig: float
    cost: float
    utility: float

    @property
    def pose(self) -> ViewPose:
        return self.candidate.pose


def evaluate(
    candidates: list[Candidate],
    vm: RoiMap,
    current: ViewPose,
    camera,
    params: EvalParams,
    rays: RayGrid | None = None,
) -> list[EvaluatedCandidate]:
    """Score every candidate against a frozen snapshot of the map.

    The ROI distance field (proximity mode only) is built once and shared.
    Output order matches input order.
    """
    if not candidates:
        return []
    if rays is None:
        rays = RayGrid.from_camera(camera)
    snap = vm.snapshot()
    field = None
    if params.util_type is UtilType.PROXIMITY:
        field = RoiDistanceField(vm.resolution, params.max_dist, vm.roi_key_array())
    positions = np.stack([c.pose.position for c in candidates])
    rotations = np.stack([c.pose.rotation for c in candidates])
    n_total, n_unknown, w_sum = _pose_ray_stats(
        snap, positions, rotations, rays, params.eval_range, field, params.max_dist
    )
    if params.util_type is UtilType.PROXIMITY:
        gains = _ray_means(w_sum, n_total)
    else:
        gains = _ray_means(n_unknown.astype(np.float64), n_total)
    out = []
    for row, cand in enumerate(candidates):
        cost = move_cost(current, cand.pose)
        out.append(
            EvaluatedCandidate(
                candidate=cand,
                ig=float(gains[row]),
                cost=cost,
                utility=utility(float(gains[row]), cost, params.alpha),
            )
        )
    return out
