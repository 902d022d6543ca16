"""Frontier extraction and candidate viewpoint sampling.

Frontier voxels are Free voxels that border Unknown space (6-adjacency) and
additionally touch evidence worth inspecting: a ROI voxel for ROI-targeted
frontiers, any Occupied voxel for exploration frontiers. Candidates look at a
frontier voxel center from a random direction and distance, and are rejected
when they leave the workspace or the view ray is blocked.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from . import _marching
from .geometry import ViewPose, orientation_towards
from .voxel_map import RoiMap, VoxelState

DEFAULT_DISTANCE_RANGE = (0.3, 1.0)
_ATTEMPTS_PER_CANDIDATE = 50


# -- workspace regions ---------------------------------------------------------


class Region(ABC):
    """Point-membership test for workspace and frontier filtering."""

    @abstractmethod
    def contains(self, points) -> np.ndarray:
        """Boolean per row of an (..., 3) point array (inclusive bounds)."""

    @abstractmethod
    def inflate(self, margin: float) -> "Region":
        """Same region grown outward by ``margin`` meters."""

    @property
    @abstractmethod
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Tight axis-aligned (min_corner, max_corner) enclosing the region."""

    def contains_point(self, point) -> bool:
        return bool(self.contains(np.asarray(point, dtype=float).reshape(1, 3))[0])


@dataclass(frozen=True, eq=False)
class Box(Region):
    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "min_corner", np.asarray(self.min_corner, dtype=float).reshape(3)
        )
        object.__setattr__(
            self, "max_corner", np.asarray(self.max_corner, dtype=float).reshape(3)
        )
        if not (self.min_corner <= self.max_corner).all():
            raise ValueError("box min corner must not exceed max corner")

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return ((points >= self.min_corner) & (points <= self.max_corner)).all(axis=-1)

    def inflate(self, margin: float) -> "Box":
        return Box(self.min_corner - margin, self.max_corner + margin)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.min_corner, self.max_corner


@dataclass(frozen=True, eq=False)
class SphericalShell(Region):
    """Points with inner_radius <= |p - center| <= outer_radius."""

    center: np.ndarray
    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if not (0.0 <= self.inner_radius <= self.outer_radius):
            raise ValueError("need 0 <= inner_radius <= outer_radius")

    def contains(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        dist = np.linalg.norm(points - self.center, axis=-1)
        return (dist >= self.inner_radius) & (dist <= self.outer_radius)

    def inflate(self, margin: float) -> "SphericalShell":
        return SphericalShell(
            self.center, max(self.inner_radius - margin, 0.0), self.outer_radius + margin
        )

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.outer_radius, self.center + self.outer_radius


# -- frontier extraction ---------------------------------------------------------


def _adjacent_any(padded: np.ndarray) -> np.ndarray:
    """OR over the six face neighbors; ``padded`` has a one-cell border."""
    return (
        padded[2:, 1:-1, 1:-1]
        | padded[:-2, 1:-1, 1:-1]
        | padded[1:-1, 2:, 1:-1]
        | padded[1:-1, :-2, 1:-1]
        | padded[1:-1, 1:-1, 2:]
        | padded[1:-1, 1:-1, :-2]
    )


def _frontier_keys(vm: RoiMap, seed_mask_name: str, region: Region | None) -> np.ndarray:
    snap = vm.snapshot()
    if snap.state.size == 0:
        return np.empty((0, 3), dtype=np.int64)
    free = snap.state == VoxelState.FREE
    # Cells outside the stored bounding box are Unknown, hence pad with True.
    unknown_padded = np.pad(snap.state == VoxelState.UNKNOWN, 1, constant_values=True)
    if seed_mask_name == "roi":
        seed_padded = np.pad(snap.roi, 1, constant_values=False)
    else:
        seed_padded = np.pad(snap.state == VoxelState.OCCUPIED, 1, constant_values=False)
    frontier = free & _adjacent_any(seed_padded) & _adjacent_any(unknown_padded)
    keys = np.argwhere(frontier) + snap.origin
    if region is not None and len(keys):
        centers = (keys + 0.5) * vm.resolution
        keys = keys[region.contains(centers)]
    return keys


def find_roi_frontiers(vm: RoiMap, region: Region | None = None) -> np.ndarray:
    """Free voxels adjacent to both a ROI voxel and Unknown space.

    Returns (N, 3) voxel keys in lexicographic order. ``region`` filters by
    voxel center.
    """
    return _frontier_keys(vm, "roi", region)


def find_exploration_frontiers(vm: RoiMap, region: Region | None = None) -> np.ndarray:
    """Free voxels adjacent to both an Occupied voxel and Unknown space."""
    return _frontier_keys(vm, "occupied", region)


# -- candidate sampling ----------------------------------------------------------


@dataclass(eq=False)
class Candidate:
    """A sampled viewpoint looking at one frontier voxel."""

    pose: ViewPose
    target_key: tuple[int, int, int]
    target_point: np.ndarray


def sample_candidates(
    vm: RoiMap,
    frontier_keys: np.ndarray,
    count: int,
    workspace: Region,
    rng: np.random.Generator,
    distance_range: tuple[float, float] = DEFAULT_DISTANCE_RANGE,
) -> list[Candidate]:
    """Random unobstructed viewpoints aimed at random frontier voxels.

    For each attempt a frontier voxel is chosen uniformly, a view direction
    uniformly on the unit sphere and a standoff distance uniformly from
    ``distance_range``. Attempts whose viewpoint leaves the workspace or whose
    line of sight to the target crosses an Occupied voxel are discarded. Gives
    up after 50 attempts per requested candidate, so the result may be short.
    """
    lo, hi = distance_range
    if not (0.0 < lo <= hi):
        raise ValueError("distance_range must satisfy 0 < lo <= hi")
    frontier_keys = np.asarray(frontier_keys, dtype=np.int64).reshape(-1, 3)
    if count <= 0 or len(frontier_keys) == 0:
        return []
    centers = (frontier_keys + 0.5) * vm.resolution
    snap = vm.snapshot()
    out: list[Candidate] = []
    attempts_left = _ATTEMPTS_PER_CANDIDATE * count
    while len(out) < count and attempts_left > 0:
        batch = min(attempts_left, max(4 * (count - len(out)), 64))
        attempts_left -= batch
        pick = rng.integers(0, len(frontier_keys), size=batch)
        normals = rng.normal(size=(batch, 3))
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        directions = normals / norms
        distances = rng.uniform(lo, hi, size=batch)
        targets = centers[pick]
        viewpoints = targets + directions * distances[:, None]
        keep = workspace.contains(viewpoints)
        if keep.any():
            blocked = _marching.occluded_batch(
                snap.state,
                snap.origin,
                vm.resolution,
                np.ascontiguousarray(viewpoints[keep]),
                np.ascontiguousarray(targets[keep]),
            )
            keep[np.nonzero(keep)[0][blocked]] = False
        for row in np.nonzero(keep)[0]:
            if len(out) == count:
                break
            key = tuple(int(v) for v in frontier_keys[pick[row]])
            out.append(
                Candidate(
                    pose=orientation_towards(viewpoints[row], targets[row]),
                    target_key=key,
                    target_point=targets[row],
                )
            )
    return out
