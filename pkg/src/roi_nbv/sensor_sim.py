"""Synthetic RGB-D rendering of procedurally generated plant scenes.

Scenes are voxelized at generation time: every primitive (stem cylinder, leaf
ellipsoid, fruit ellipsoid) is rasterized into a dense label grid, fruits last
so they own their voxels. Rendering marches camera rays through that grid and
reports the first filled voxel at its chord midpoint, which keeps every
back-projected depth point strictly inside the voxel it hit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import ViewPose, fov_direction_grid
from . import _marching


@dataclass(frozen=True)
class CameraModel:
    """Pinhole RGB-D camera intrinsics and depth range."""

    width: int = 160
    height: int = 120
    fov_h_deg: float = 69.0
    fov_v_deg: float = 52.0
    min_range: float = 0.2
    max_range: float = 2.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")
        if not (0.0 < self.fov_h_deg < 180.0 and 0.0 < self.fov_v_deg < 180.0):
            raise ValueError("field of view must be in (0, 180) degrees")
        if not (0.0 <= self.min_range < self.max_range):
            raise ValueError("need 0 <= min_range < max_range")

    def pixel_directions(self) -> np.ndarray:
        """(height, width, 3) unit ray directions in the camera frame."""
        return _pixel_directions(self.width, self.height, self.fov_h_deg, self.fov_v_deg)


@lru_cache(maxsize=16)
def _pixel_directions(width, height, fov_h_deg, fov_v_deg):
    dirs = fov_direction_grid(fov_h_deg, fov_v_deg, width, height)
    dirs.setflags(write=False)
    return dirs


# -- color model -------------------------------------------------------------


def rgb_to_hsi(rgb):
    """Hue (degrees in (-180, 180]), saturation and intensity per RGB triple.

    Accepts any (..., 3) array. Gray pixels get hue 0 and saturation 0; black
    pixels get intensity 0.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ValueError("expected (..., 3) RGB values")
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    intensity = (r + g + b) / 3.0
    lowest = np.minimum(np.minimum(r, g), b)
    with np.errstate(invalid="ignore", divide="ignore"):
        saturation = np.where(intensity > 0.0, 1.0 - lowest / intensity, 0.0)
    hue = np.degrees(np.arctan2(np.sqrt(3.0) * (g - b), 2.0 * r - g - b))
    return hue, saturation, intensity


@dataclass(frozen=True)
class FruitColorFilter:
    """HSI window that classifies a pixel color as fruit-like."""

    hue_min_deg: float = -30.0
    hue_max_deg: float = 50.0
    min_saturation: float = 0.12
    min_intensity: float = 0.12

    def __post_init__(self):
        if not self.hue_min_deg < self.hue_max_deg:
            raise ValueError("hue window must be non-empty")
        if self.hue_max_deg - self.hue_min_deg > 360.0:
            raise ValueError("hue window wider than a full turn")
        if not (0.0 <= self.min_saturation <= 1.0):
            raise ValueError("min_saturation must be in [0, 1]")
        if self.min_intensity < 0.0:
            raise ValueError("min_intensity must be non-negative")

    def matches(self, rgb) -> np.ndarray:
        hue, saturation, intensity = rgb_to_hsi(rgb)
        center = 0.5 * (self.hue_min_deg + self.hue_max_deg)
        half_width = 0.5 * (self.hue_max_deg - self.hue_min_deg)
        delta = (hue - center + 180.0) % 360.0 - 180.0
        in_window = np.abs(delta) <= half_width
        return in_window & (saturation >= self.min_saturation) & (intensity >= self.min_intensity)


DEFAULT_FRUIT_FILTER = FruitColorFilter()


def hsi_is_fruit(rgb, color_filter: FruitColorFilter = DEFAULT_FRUIT_FILTER):
    """True where the color falls inside the fruit HSI window (inclusive)."""
    result = color_filter.matches(rgb)
    if result.ndim == 0:
        return bool(result)
    return result


# -- scene configuration ------------------------------------------------------


@dataclass(frozen=True)
class PlantConfig:
    """One potted plant: a stem with drooping leaves and attached fruits."""

    position: tuple[float, float, float]
    height: float = 0.9
    fruit_count: int = 7
    leaf_count: int = 16
    canopy_radius: float = 0.16
    fruit_zone: tuple[float, float] = (0.35, 0.68)

    def __post_init__(self):
        if len(self.position) != 3:
            raise ValueError("position must have 3 components")
        if self.height <= 0.0:
            raise ValueError("height must be positive")
        if self.fruit_count < 0 or self.leaf_count < 0:
            raise ValueError("counts must be non-negative")
        lo, hi = self.fruit_zone
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError("fruit_zone must satisfy 0 <= lo < hi <= 1")


@dataclass(frozen=True)
class SceneConfig:
    """Room bounds, voxel resolution and the plants to generate."""

    resolution: float = 0.01
    room_min: tuple[float, float, float] = (-2.0, -2.0, 0.0)
    room_max: tuple[float, float, float] = (2.0, 2.0, 2.2)
    plants: tuple[PlantConfig, ...] = ()
    fruit_semiaxis_range: tuple[float, float] = (0.025, 0.042)
    fruit_gap: float = 0.03
    # 0 disables the floor slab; any positive value lays at least one voxel
    # layer of non-fruit matter across the whole room footprint.
    floor_thickness: float = 0.0

    def __post_init__(self):
        if self.resolution <= 0.0 or not math.isfinite(self.resolution):
            raise ValueError("resolution must be finite and positive")
        lo = np.asarray(self.room_min, dtype=float)
        hi = np.asarray(self.room_max, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or not (lo < hi).all():
            raise ValueError("room_min must be strictly below room_max")
        a, b = self.fruit_semiaxis_range
        if not (0.0 < a <= b):
            raise ValueError("fruit semiaxis range must satisfy 0 < lo <= hi")
        if self.fruit_gap < 0.0:
            raise ValueError("fruit_gap must be non-negative")
        if self.floor_thickness < 0.0 or self.floor_thickness >= hi[2] - lo[2]:
            raise ValueError("floor_thickness must be in [0, room height)")
        object.__setattr__(self, "plants", tuple(self.plants))


@dataclass(frozen=True, eq=False)
class GroundTruthFruit:
    """Final voxel ownership statistics of one generated fruit."""

    fruit_id: int
    centroid: np.ndarray
    aabb_min: np.ndarray
    aabb_max: np.ndarray
    voxel_count: int

    @property
    def aabb_volume(self) -> float:
        extent = self.aabb_max - self.aabb_min
        return float(extent[0] * extent[1] * extent[2])


_STEM_RADIUS = 0.016
_LEAF_THICKNESS = 0.012


@dataclass(eq=False)
class GroundTruthScene:
    """Voxelized scene: per-voxel color palette index and fruit ownership.

    ``color_cells`` and ``fruit_cells`` are dense int16 grids indexed by voxel
    key minus ``grid_origin``; -1 means empty / not a fruit voxel. Fruits own
    their voxels exclusively (they overwrite plant matter and never overlap
    each other).
    """

    resolution: float
    room_min: np.ndarray
    room_max: np.ndarray
    grid_origin: np.ndarray
    color_cells: np.ndarray
    fruit_cells: np.ndarray
    palette: np.ndarray
    fruit_gt: dict[int, GroundTruthFruit] = field(default_factory=dict)

    @property
    def occupied_count(self) -> int:
        return int((self.color_cells >= 0).sum())

    @property
    def centroid(self) -> np.ndarray:
        """Mean center of all occupied voxels."""
        idx = np.argwhere(self.color_cells >= 0)
        centers = (idx + self.grid_origin + 0.5) * self.resolution
        return centers.mean(axis=0)

    def _cell_index(self, key) -> tuple[int, int, int] | None:
        idx = np.asarray(key, dtype=np.int64) - self.grid_origin
        if (idx < 0).any() or (idx >= np.asarray(self.color_cells.shape)).any():
            return None
        return int(idx[0]), int(idx[1]), int(idx[2])

    def is_occupied(self, key) -> bool:
        idx = self._cell_index(key)
        return idx is not None and self.color_cells[idx] >= 0

    def fruit_id_of(self, key) -> int | None:
        idx = self._cell_index(key)
        if idx is None or self.fruit_cells[idx] < 0:
            return None
        return int(self.fruit_cells[idx])

    def color_of(self, key) -> np.ndarray | None:
        idx = self._cell_index(key)
        if idx is None or self.color_cells[idx] < 0:
            return None
        return self.palette[int(self.color_cells[idx])].copy()

    def occupied_key_array(self) -> np.ndarray:
        return np.argwhere(self.color_cells >= 0) + self.grid_origin

    def fruit_key_array(self, fruit_id: int) -> np.ndarray:
        if fruit_id not in self.fruit_gt:
            raise KeyError(f"unknown fruit id {fruit_id}")
        return np.argwhere(self.fruit_cells == fruit_id) + self.grid_origin

    def to_roi_map(self, params=None):
        """Perfect-knowledge map: occupied voxels at max evidence, fruit voxels
        ROI-positive, everything else left Unknown."""
        from .voxel_map import MapParams, RoiMap

        params = params if params is not None else MapParams()
        keys = self.occupied_key_array()
        idx = keys - self.grid_origin
        is_fruit = self.fruit_cells[idx[:, 0], idx[:, 1], idx[:, 2]] >= 0
        occ = np.full(len(keys), params.max_logodds)
        roi = np.where(is_fruit, params.max_logodds, params.min_logodds)
        return RoiMap.from_node_arrays(self.resolution, keys, occ, roi, params)

    @classmethod
    def from_voxels(cls, resolution, room_min, room_max, voxels):
        """Build a scene from an explicit voxel table, mainly for tests.

        ``voxels`` maps key -> (rgb, fruit_id or None).
        """
        if not voxels:
            raise ValueError("scene must contain at least one voxel")
        keys = np.array(sorted(voxels.keys()), dtype=np.int64)
        palette: list[tuple[float, float, float]] = []
        palette_index: dict[tuple[float, float, float], int] = {}
        color_ids = np.empty(len(keys), dtype=np.int16)
        fruit_ids = np.full(len(keys), -1, dtype=np.int16)
        for row, key in enumerate(map(tuple, keys.tolist())):
            rgb, fruit_id = voxels[key]
            rgb = tuple(float(v) for v in rgb)
            if rgb not in palette_index:
                palette_index[rgb] = len(palette)
                palette.append(rgb)
            color_ids[row] = palette_index[rgb]
            if fruit_id is not None:
                fruit_ids[row] = int(fruit_id)
        return _assemble_scene(
            resolution,
            np.asarray(room_min, dtype=float),
            np.asarray(room_max, dtype=float),
            keys,
            color_ids,
            fruit_ids,
            np.asarray(palette, dtype=np.float64),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroundTruthScene):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and np.array_equal(self.room_min, other.room_min)
            and np.array_equal(self.room_max, other.room_max)
            and np.array_equal(self.grid_origin, other.grid_origin)
            and np.array_equal(self.color_cells, other.color_cells)
            and np.array_equal(self.fruit_cells, other.fruit_cells)
            and np.array_equal(self.palette, other.palette)
        )


# -- scene generation ---------------------------------------------------------


def _ellipsoid_keys(center, semiaxes, rotation, res):
    """Keys of voxels whose centers lie inside the oriented ellipsoid."""
    center = np.asarray(center, dtype=float)
    semiaxes = np.asarray(semiaxes, dtype=float)
    rotation = np.asarray(rotation, dtype=float)
    reach = np.abs(rotation) @ semiaxes
    lo = np.floor((center - reach) / res).astype(np.int64)
    hi = np.floor((center + reach) / res).astype(np.int64)
    axes = [np.arange(lo[a], hi[a] + 1, dtype=np.int64) for a in range(3)]
    ii, jj, kk = np.meshgrid(*axes, indexing="ij")
    keys = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
    centers = (keys + 0.5) * res
    local = (centers - center) @ rotation
    q = ((local / semiaxes) ** 2).sum(axis=1)
    return keys[q <= 1.0]


def _cylinder_keys(x0, y0, z_lo, z_hi, radius, res):
    """Keys of voxels whose centers lie inside the vertical cylinder."""
    lo_i = math.floor((x0 - radius) / res)
    hi_i = math.floor((x0 + radius) / res)
    lo_j = math.floor((y0 - radius) / res)
    hi_j = math.floor((y0 + radius) / res)
    lo_k = math.floor(z_lo / res)
    hi_k = math.floor(z_hi / res)
    axes = [
        np.arange(lo_i, hi_i + 1, dtype=np.int64),
        np.arange(lo_j, hi_j + 1, dtype=np.int64),
        np.arange(lo_k, hi_k + 1, dtype=np.int64),
    ]
    ii, jj, kk = np.meshgrid(*axes, indexing="ij")
    keys = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
    centers = (keys + 0.5) * res
    radial = (centers[:, 0] - x0) ** 2 + (centers[:, 1] - y0) ** 2
    inside = (radial <= radius * radius) & (centers[:, 2] >= z_lo) & (centers[:, 2] <= z_hi)
    return keys[inside]


def _leaf_rotation(azimuth, tilt):
    """Columns: leaf long axis (outward, drooping), side axis, normal."""
    long_axis = np.array(
        [math.cos(tilt) * math.cos(azimuth), math.cos(tilt) * math.sin(azimuth), -math.sin(tilt)]
    )
    side = np.cross([0.0, 0.0, 1.0], long_axis)
    side /= np.linalg.norm(side)
    normal = np.cross(long_axis, side)
    return np.stack([long_axis, side, normal], axis=1)


def _place_fruits(rng, plant, config):
    """Fruit centers and semiaxes with pairwise gaps, by rejection sampling."""
    placed: list[tuple[np.ndarray, np.ndarray]] = []
    base = np.asarray(plant.position, dtype=float)
    lo_s, hi_s = config.fruit_semiaxis_range
    gap = config.fruit_gap
    zone_lo, zone_hi = plant.fruit_zone
    tries = 0
    while len(placed) < plant.fruit_count:
        tries += 1
        if tries > 600 * max(plant.fruit_count, 1):
            raise RuntimeError("could not place fruits with the requested separation")
        if tries % (150 * max(plant.fruit_count, 1)) == 0:
            gap = max(gap * 0.8, 0.005)
        radius = rng.uniform(0.055, max(plant.canopy_radius, 0.06))
        azimuth = rng.uniform(0.0, 2.0 * math.pi)
        z_frac = rng.uniform(zone_lo, zone_hi)
        center = base + np.array(
            [radius * math.cos(azimuth), radius * math.sin(azimuth), plant.height * z_frac]
        )
        semiaxes = rng.uniform(lo_s, hi_s, size=3)
        if center[2] < semiaxes[2] + 0.02:
            continue
        ok = True
        for other_center, other_semi in placed:
            need = float(semiaxes.max() + other_semi.max()) + gap
            if float(np.linalg.norm(center - other_center)) < need:
                ok = False
                break
        if ok:
            placed.append((center, semiaxes))
    return placed


def _floor_keys(config: SceneConfig) -> np.ndarray:
    """Voxel keys of a slab covering the room footprint above room_min z."""
    res = config.resolution
    lo = np.asarray(config.room_min, dtype=float)
    hi = np.asarray(config.room_max, dtype=float)
    i_lo = math.ceil(lo[0] / res - 0.5)
    i_hi = math.floor(hi[0] / res - 0.5)
    j_lo = math.ceil(lo[1] / res - 0.5)
    j_hi = math.floor(hi[1] / res - 0.5)
    k_lo = math.ceil(lo[2] / res - 0.5)
    layers = max(1, int(round(config.floor_thickness / res)))
    ii, jj, kk = np.meshgrid(
        np.arange(i_lo, i_hi + 1, dtype=np.int64),
        np.arange(j_lo, j_hi + 1, dtype=np.int64),
        np.arange(k_lo, k_lo + layers, dtype=np.int64),
        indexing="ij",
    )
    return np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)


def generate_scene(config: SceneConfig, seed: int) -> GroundTruthScene:
    """Deterministically voxelize the configured plants and fruits.

    Each plant consumes its own RNG stream derived from (seed, plant index),
    so editing one plant's parameters does not disturb the others. Fruits are
    rasterized after all plant matter and therefore own their voxels.
    """
    res = config.resolution
    plant_prims: list[tuple[np.ndarray, int]] = []  # (keys, palette_idx)
    fruit_prims: list[tuple[np.ndarray, int, int]] = []  # (keys, palette_idx, fruit_id)
    palette: list[np.ndarray] = []
    fruit_id = 0
    if config.floor_thickness > 0.0:
        palette.append(np.array([0.32, 0.30, 0.28]))
        plant_prims.append((_floor_keys(config), len(palette) - 1))
    for plant_index, plant in enumerate(config.plants):
        rng = np.random.default_rng([int(seed), plant_index])
        base = np.asarray(plant.position, dtype=float)

        stem_shade = rng.uniform(0.8, 1.15)
        palette.append(np.array([0.10, 0.08, 0.05]) * stem_shade)
        stem_keys = _cylinder_keys(
            base[0], base[1], base[2], base[2] + plant.height, _STEM_RADIUS, res
        )
        plant_prims.append((stem_keys, len(palette) - 1))

        for _ in range(plant.leaf_count):
            z_frac = rng.uniform(0.40, 0.97)
            azimuth = rng.uniform(0.0, 2.0 * math.pi)
            tilt = math.radians(rng.uniform(15.0, 55.0))
            length = 0.09 * rng.uniform(0.8, 1.25)
            width = 0.06 * rng.uniform(0.8, 1.2)
            color = np.array(
                [
                    0.08 + rng.uniform(0.0, 0.06),
                    0.34 + rng.uniform(0.0, 0.18),
                    0.07 + rng.uniform(0.0, 0.08),
                ]
            )
            rotation = _leaf_rotation(azimuth, tilt)
            attach = base + np.array([0.0, 0.0, plant.height * z_frac])
            center = attach + rotation[:, 0] * (length * 0.55 + _STEM_RADIUS)
            keys = _ellipsoid_keys(
                center, (length, width, _LEAF_THICKNESS), rotation, res
            )
            palette.append(color)
            plant_prims.append((keys, len(palette) - 1))

        for center, semiaxes in _place_fruits(rng, plant, config):
            color = np.array(
                [
                    0.70 + rng.uniform(0.0, 0.15),
                    0.08 + rng.uniform(0.0, 0.12),
                    0.06 + rng.uniform(0.0, 0.06),
                ]
            )
            keys = _ellipsoid_keys(center, semiaxes, np.eye(3), res)
            palette.append(color)
            fruit_prims.append((keys, len(palette) - 1, fruit_id))
            fruit_id += 1

    key_blocks = []
    color_blocks = []
    fruit_blocks = []
    for keys, pal in plant_prims:
        key_blocks.append(keys)
        color_blocks.append(np.full(len(keys), pal, dtype=np.int16))
        fruit_blocks.append(np.full(len(keys), -1, dtype=np.int16))
    for keys, pal, fid in fruit_prims:
        key_blocks.append(keys)
        color_blocks.append(np.full(len(keys), pal, dtype=np.int16))
        fruit_blocks.append(np.full(len(keys), fid, dtype=np.int16))
    if not key_blocks:
        raise ValueError("scene config produced no voxels")
    all_keys = np.concatenate(key_blocks)
    all_colors = np.concatenate(color_blocks)
    all_fruits = np.concatenate(fruit_blocks)
    return _assemble_scene(
        res,
        np.asarray(config.room_min, dtype=float),
        np.asarray(config.room_max, dtype=float),
        all_keys,
        all_colors,
        all_fruits,
        np.asarray(palette, dtype=np.float64),
    )


def _assemble_scene(res, room_min, room_max, keys, color_ids, fruit_ids, palette):
    """Scatter primitive voxel lists into dense grids; later rows override."""
    centers = (keys + 0.5) * res
    inside = ((centers >= room_min) & (centers <= room_max)).all(axis=1)
    keys, color_ids, fruit_ids = keys[inside], color_ids[inside], fruit_ids[inside]
    if len(keys) == 0:
        raise ValueError("scene has no voxels inside the room")
    origin = keys.min(axis=0)
    shape = keys.max(axis=0) - origin + 1
    color_cells = np.full(tuple(shape), -1, dtype=np.int16)
    fruit_cells = np.full(tuple(shape), -1, dtype=np.int16)
    idx = keys - origin
    color_cells[idx[:, 0], idx[:, 1], idx[:, 2]] = color_ids
    fruit_cells[idx[:, 0], idx[:, 1], idx[:, 2]] = fruit_ids

    fruit_gt: dict[int, GroundTruthFruit] = {}
    flat_fruit = fruit_cells.ravel()
    owned = np.nonzero(flat_fruit >= 0)[0]
    owner_ids = flat_fruit[owned].astype(np.int64)
    owned_idx = np.stack(np.unravel_index(owned, fruit_cells.shape), axis=1)
    owned_centers = (owned_idx + origin + 0.5) * res
    expected = set(int(f) for f in fruit_ids[fruit_ids >= 0])
    for fid in sorted(expected):
        sel = owner_ids == fid
        if not sel.any():
            raise RuntimeError(f"fruit {fid} lost all voxels; adjust the scene config")
        pts = owned_centers[sel]
        fruit_gt[fid] = GroundTruthFruit(
            fruit_id=fid,
            centroid=pts.mean(axis=0),
            aabb_min=pts.min(axis=0) - res / 2.0,
            aabb_max=pts.max(axis=0) + res / 2.0,
            voxel_count=int(sel.sum()),
        )
    return GroundTruthScene(
        resolution=float(res),
        room_min=room_min,
        room_max=room_max,
        grid_origin=origin.astype(np.int64),
        color_cells=color_cells,
        fruit_cells=fruit_cells,
        palette=palette,
        fruit_gt=fruit_gt,
    )


# -- rendering ----------------------------------------------------------------


@dataclass(eq=False)
class RenderResult:
    """One synthetic RGB-D frame; invalid pixels have depth inf and color 0."""

    depth: np.ndarray
    color: np.ndarray
    fruit_id: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.depth)


def render(scene: GroundTruthScene, camera: CameraModel, pose: ViewPose) -> RenderResult:
    """Ray-march every pixel; depth is the hit voxel's chord midpoint.

    Surfaces closer than ``camera.min_range`` block the ray but produce an
    invalid pixel, as a real depth camera would.
    """
    dirs_world = camera.pixel_directions() @ pose.rotation.T
    flat_dirs = np.ascontiguousarray(dirs_world.reshape(-1, 3))
    depth_flat, hits = _marching.render_depth(
        scene.color_cells,
        scene.grid_origin,
        scene.resolution,
        np.ascontiguousarray(pose.position),
        flat_dirs,
        camera.min_range,
        camera.max_range,
    )
    shape = (camera.height, camera.width)
    depth = depth_flat.reshape(shape)
    color = np.zeros(shape + (3,), dtype=np.float64)
    fruit_id = np.full(shape, -1, dtype=np.int32)
    hit_mask = hits[:, 0] >= 0
    if hit_mask.any():
        hi = hits[hit_mask]
        color_ids = scene.color_cells[hi[:, 0], hi[:, 1], hi[:, 2]]
        color.reshape(-1, 3)[hit_mask] = scene.palette[color_ids]
        fruit_id.reshape(-1)[hit_mask] = scene.fruit_cells[hi[:, 0], hi[:, 1], hi[:, 2]]
    return RenderResult(depth=depth, color=color, fruit_id=fruit_id)


# -- labeled point clouds ------------------------------------------------------


@dataclass(eq=False)
class LabeledCloud:
    """Sensor-origin point cloud with a per-point ROI (fruit) flag."""

    origin: np.ndarray
    positions: np.ndarray
    is_roi: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.is_roi = np.asarray(self.is_roi, dtype=bool).reshape(-1)
        if len(self.positions) != len(self.is_roi):
            raise ValueError("positions and is_roi must have equal length")
        if not np.isfinite(self.origin).all() or not np.isfinite(self.positions).all():
            raise ValueError("cloud coordinates must be finite")

    def __len__(self) -> int:
        return len(self.positions)


def downsample_labeled_points(points, flags, resolution):
    """One representative per voxel: centroid position, OR of the flags.

    Output rows are ordered by voxel key, so the result is independent of the
    input point order up to floating-point summation order.
    """
    from .voxel_map import _pack_keys, _unpack_keys  # shared packed-key codec

    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    flags = np.asarray(flags, dtype=bool).reshape(-1)
    if len(points) != len(flags):
        raise ValueError("points and flags must have equal length")
    if len(points) == 0:
        return points.copy(), flags.copy()
    keys = np.floor(points / float(resolution)).astype(np.int64)
    packed = _pack_keys(keys)
    uniq, inverse = np.unique(packed, return_inverse=True)
    counts = np.bincount(inverse, minlength=len(uniq)).astype(np.float64)
    centroids = np.empty((len(uniq), 3), dtype=np.float64)
    for axis in range(3):
        centroids[:, axis] = np.bincount(
            inverse, weights=points[:, axis], minlength=len(uniq)
        )
    centroids /= counts[:, None]
    roi = np.bincount(inverse, weights=flags.astype(np.float64), minlength=len(uniq)) > 0.0
    return centroids, roi


def cloud_from_render(
    result: RenderResult,
    camera: CameraModel,
    pose: ViewPose,
    map_resolution: float,
    color_filter: FruitColorFilter = DEFAULT_FRUIT_FILTER,
) -> LabeledCloud:
    """Back-project valid pixels, label by color, downsample to map voxels."""
    if float(map_resolution) <= 0.0:
        raise ValueError("map_resolution must be positive")
    mask = result.valid
    if not mask.any():
        empty = np.empty((0, 3), dtype=np.float64)
        return LabeledCloud(pose.position.copy(), empty, np.empty(0, dtype=bool))
    dirs_world = camera.pixel_directions() @ pose.rotation.T
    points = pose.position + dirs_world[mask] * result.depth[mask][:, None]
    flags = color_filter.matches(result.color[mask])
    positions, roi = downsample_labeled_points(points, flags, map_resolution)
    return LabeledCloud(pose.position.copy(), positions, roi)


def apply_detection_noise(
    cloud: LabeledCloud,
    false_positive_rate: float,
    false_negative_rate: float,
    seed: int,
) -> LabeledCloud:
    """Independently corrupt per-point ROI flags.

    Each true flag survives with probability 1 - false_negative_rate; each
    false flag flips on with probability false_positive_rate. Zero rates
    reproduce the input flags exactly.
    """
    for name, rate in (
        ("false_positive_rate", false_positive_rate),
        ("false_negative_rate", false_negative_rate),
    ):
        if not (0.0 <= rate <= 1.0):
            raise ValueError(f"{name} must be in [0, 1]")
    draws = np.random.default_rng(seed).random(len(cloud))
    flags = np.where(cloud.is_roi, draws >= false_negative_rate, draws < false_positive_rate)
    return LabeledCloud(cloud.origin.copy(), cloud.positions.copy(), flags)


# -- fruit ground-truth sidecar -------------------------------------------------

_FRUIT_TABLE_HEADER = "# fruit ground truth v1"


def write_fruit_table(path, scene: GroundTruthScene) -> None:
    """Plain-text fruit table with repr-exact floats, one fruit per line."""
    lines = [
        _FRUIT_TABLE_HEADER,
        f"# resolution {scene.resolution!r}",
        "# fruit_id cx cy cz min_x min_y min_z max_x max_y max_z voxel_count",
    ]
    for fid in sorted(scene.fruit_gt):
        f = scene.fruit_gt[fid]
        fields = [str(fid)]
        fields += [repr(float(v)) for v in f.centroid]
        fields += [repr(float(v)) for v in f.aabb_min]
        fields += [repr(float(v)) for v in f.aabb_max]
        fields.append(str(f.voxel_count))
        lines.append(" ".join(fields))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_fruit_table(path) -> tuple[float, dict[int, GroundTruthFruit]]:
    """Parse a fruit table; returns (resolution, fruits by id)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != _FRUIT_TABLE_HEADER:
        raise ValueError("not a fruit ground-truth table")
    resolution = None
    fruits: dict[int, GroundTruthFruit] = {}
    for line in lines[1:]:
        if line.startswith("# resolution "):
            resolution = float(line.removeprefix("# resolution "))
            continue
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 11:
            raise ValueError(f"malformed fruit row: {line!r}")
        fid = int(parts[0])
        values = [float(v) for v in parts[1:10]]
        fruits[fid] = GroundTruthFruit(
            fruit_id=fid,
            centroid=np.array(values[0:3]),
            aabb_min=np.array(values[3:6]),
            aabb_max=np.array(values[6:9]),
            voxel_count=int(parts[10]),
        )
    if resolution is None:
        raise ValueError("fruit table missing resolution line")
    return resolution, fruits
