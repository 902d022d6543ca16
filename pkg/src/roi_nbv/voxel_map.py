"""Sparse dual-channel voxel map: clamped log-odds occupancy plus ROI evidence.

Voxel key ``(i, j, k)`` covers the half-open cube ``[i*res, (i+1)*res) x ...``
and has center ``(i + 0.5) * res``. Voxels without a stored node are Unknown.
Ray traversal is sampled: a voxel is visited iff some sample point
``origin + dir * (k * res / 20)`` with ``k < ceil(dist / (res / 20))`` falls
inside it, which is the reference convention for insertion and raycasting.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, NamedTuple

import numpy as np

VoxelKey = tuple[int, int, int]

_COORD_LIMIT = 1 << 20  # 21 bits per axis in the packed int64 key
_COORD_MASK = (1 << 21) - 1
_MAGIC = b"ROIMAP1\x00"
_NODE_DTYPE = np.dtype(
    [("i", "<i4"), ("j", "<i4"), ("k", "<i4"), ("occ", "<f4"), ("roi", "<f4")]
)
_CHUNK_SAMPLES = 4_000_000
_MAX_SNAPSHOT_CELLS = 400_000_000


class MapFormatError(ValueError):
    """Raised when serialized map bytes are malformed."""


class VoxelState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


class VoxelNode(NamedTuple):
    occ_logodds: float
    roi_logodds: float


@dataclass(frozen=True)
class MapParams:
    """Log-odds increments, clamp bounds and the ROI decision threshold."""

    hit_logodds: float = 0.85
    miss_logodds: float = -0.4
    roi_hit_logodds: float = 0.85
    roi_miss_logodds: float = -0.4
    min_logodds: float = -3.5
    max_logodds: float = 3.5
    roi_threshold: float = 0.0

    def __post_init__(self):
        if not (self.hit_logodds > 0.0 > self.miss_logodds):
            raise ValueError("hit_logodds must be positive, miss_logodds negative")
        if not (self.roi_hit_logodds > 0.0 > self.roi_miss_logodds):
            raise ValueError("roi increments must straddle zero")
        if not (self.min_logodds <= 0.0 <= self.max_logodds):
            raise ValueError("clamp bounds must straddle zero")


_OFFSETS_6 = (
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
)
_OFFSETS_26 = tuple(
    (di, dj, dk)
    for di in (-1, 0, 1)
    for dj in (-1, 0, 1)
    for dk in (-1, 0, 1)
    if (di, dj, dk) != (0, 0, 0)
)


def neighbors(key: VoxelKey, connectivity: int = 6) -> list[VoxelKey]:
    """Adjacent voxel keys in a fixed deterministic order."""
    if connectivity == 6:
        offsets = _OFFSETS_6
    elif connectivity == 26:
        offsets = _OFFSETS_26
    else:
        raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")
    i, j, k = key
    return [(i + a, j + b, k + c) for a, b, c in offsets]


def _pack_keys(keys3: np.ndarray) -> np.ndarray:
    keys3 = np.asarray(keys3, dtype=np.int64)
    if keys3.size and int(np.abs(keys3).max()) >= _COORD_LIMIT:
        raise ValueError("voxel index outside the packable coordinate range")
    shifted = keys3 + _COORD_LIMIT
    return (shifted[..., 0] << 42) | (shifted[..., 1] << 21) | shifted[..., 2]


def _unpack_keys(packed: np.ndarray) -> np.ndarray:
    packed = np.asarray(packed, dtype=np.int64)
    out = np.empty(packed.shape + (3,), dtype=np.int64)
    out[..., 0] = packed >> 42
    out[..., 1] = (packed >> 21) & _COORD_MASK
    out[..., 2] = packed & _COORD_MASK
    return out - _COORD_LIMIT


class MapSnapshot:
    """Frozen dense view of a map: uint8 state grid plus a ROI mask.

    ``state`` holds VoxelState values; indices are world keys minus ``origin``.
    Reads outside the grid are Unknown.
    """

    __slots__ = ("resolution", "origin", "state", "roi")

    def __init__(self, resolution, origin, state, roi):
        self.resolution = float(resolution)
        self.origin = origin
        self.state = state
        self.roi = roi

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.state.shape

    def state_of(self, key: VoxelKey) -> int:
        i = key[0] - self.origin[0]
        j = key[1] - self.origin[1]
        k = key[2] - self.origin[2]
        nx, ny, nz = self.state.shape
        if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
            return int(self.state[i, j, k])
        return int(VoxelState.UNKNOWN)

    def roi_key_array(self) -> np.ndarray:
        return np.argwhere(self.roi).astype(np.int64) + self.origin


class RoiMap:
    """Unbounded sparse voxel map with occupancy and ROI log-odds channels.

    Nodes are stored as parallel arrays sorted by packed key; both channels are
    float32 so that serialization round-trips bit-exactly.
    """

    def __init__(self, resolution: float, params: MapParams | None = None):
        resolution = float(resolution)
        if not math.isfinite(resolution) or resolution <= 0.0:
            raise ValueError("resolution must be finite and positive")
        self.resolution = resolution
        self.params = params if params is not None else MapParams()
        self._packed = np.empty(0, dtype=np.int64)
        self._occ = np.empty(0, dtype=np.float32)
        self._roi = np.empty(0, dtype=np.float32)
        self._snapshot_cache: MapSnapshot | None = None

    # -- key geometry -------------------------------------------------------

    def world_to_key(self, point) -> VoxelKey:
        p = np.asarray(point, dtype=float)
        idx = np.floor(p / self.resolution)
        return (int(idx[0]), int(idx[1]), int(idx[2]))

    def key_to_center(self, key: VoxelKey) -> np.ndarray:
        return (np.asarray(key, dtype=float) + 0.5) * self.resolution

    # -- node access --------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self._packed)

    @property
    def known_count(self) -> int:
        return int(np.count_nonzero(self._occ))

    @property
    def roi_count(self) -> int:
        return int((self._roi > np.float32(self.params.roi_threshold)).sum())

    def _row(self, key: VoxelKey) -> int:
        if len(self._packed) == 0:
            return -1
        packed = int(_pack_keys(np.asarray(key, dtype=np.int64)[None, :])[0])
        pos = int(np.searchsorted(self._packed, packed))
        if pos < len(self._packed) and self._packed[pos] == packed:
            return pos
        return -1

    def occ_logodds(self, key: VoxelKey) -> float:
        row = self._row(key)
        return float(self._occ[row]) if row >= 0 else 0.0

    def roi_logodds(self, key: VoxelKey) -> float:
        row = self._row(key)
        return float(self._roi[row]) if row >= 0 else 0.0

    def state_of(self, key: VoxelKey) -> VoxelState:
        value = self.occ_logodds(key)
        if value > 0.0:
            return VoxelState.OCCUPIED
        if value < 0.0:
            return VoxelState.FREE
        return VoxelState.UNKNOWN

    def is_roi(self, key: VoxelKey) -> bool:
        return self.roi_logodds(key) > self.params.roi_threshold

    def keys(self) -> list[VoxelKey]:
        keys3 = _unpack_keys(self._packed)
        return [tuple(int(v) for v in row) for row in keys3]

    def items(self) -> Iterator[tuple[VoxelKey, VoxelNode]]:
        keys3 = _unpack_keys(self._packed)
        for row in range(len(self._packed)):
            key = (int(keys3[row, 0]), int(keys3[row, 1]), int(keys3[row, 2]))
            yield key, VoxelNode(float(self._occ[row]), float(self._roi[row]))

    def roi_key_array(self) -> np.ndarray:
        mask = self._roi > np.float32(self.params.roi_threshold)
        return _unpack_keys(self._packed[mask])

    @classmethod
    def from_node_arrays(
        cls,
        resolution: float,
        keys: np.ndarray,
        occ_logodds: np.ndarray,
        roi_logodds: np.ndarray,
        params: MapParams | None = None,
    ) -> "RoiMap":
        """Bulk-build a map from per-voxel keys and channel values (clamped).

        ``keys`` has shape (N, 3) and must not contain duplicates.
        """
        out = cls(resolution, params)
        keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
        occ = np.asarray(occ_logodds, dtype=np.float64).reshape(-1)
        roi = np.asarray(roi_logodds, dtype=np.float64).reshape(-1)
        if not (len(keys) == len(occ) == len(roi)):
            raise ValueError("keys and channel arrays must have equal length")
        if not (np.isfinite(occ).all() and np.isfinite(roi).all()):
            raise ValueError("log-odds values must be finite")
        packed = _pack_keys(keys)
        order = np.argsort(packed)
        packed = packed[order]
        if len(packed) > 1 and (np.diff(packed) == 0).any():
            raise ValueError("duplicate voxel keys")
        lo = np.float32(out.params.min_logodds)
        hi = np.float32(out.params.max_logodds)
        out._packed = packed
        out._occ = np.clip(occ[order].astype(np.float32), lo, hi)
        out._roi = np.clip(roi[order].astype(np.float32), lo, hi)
        return out

    def set_node(self, key: VoxelKey, occ_logodds: float, roi_logodds: float) -> None:
        """Directly set both channels of one voxel (clamped)."""
        packed = _pack_keys(np.asarray(key, dtype=np.int64)[None, :])
        self._ensure_nodes(packed)
        row = self._row(key)
        lo = np.float32(self.params.min_logodds)
        hi = np.float32(self.params.max_logodds)
        self._occ[row] = np.clip(np.float32(occ_logodds), lo, hi)
        self._roi[row] = np.clip(np.float32(roi_logodds), lo, hi)
        self._snapshot_cache = None

    # -- traversal ----------------------------------------------------------

    def _visited_packed(self, origin: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Unique packed keys of all voxels sampled along origin->point rays."""
        res = self.resolution
        eps = res / 20.0
        d = points - origin
        dist = np.sqrt((d * d).sum(axis=1))
        moving = dist > 0.0
        if not moving.any():
            return np.empty(0, dtype=np.int64)
        u = d[moving] / dist[moving, None]
        dist = dist[moving]
        counts = np.ceil(dist / eps).astype(np.int64)
        cum = np.cumsum(counts)
        collected = []
        start = 0
        while start < len(counts):
            base = cum[start - 1] if start > 0 else 0
            stop = int(np.searchsorted(cum, base + _CHUNK_SAMPLES)) + 1
            stop = min(max(stop, start + 1), len(counts))
            chunk_counts = counts[start:stop]
            total = int(chunk_counts.sum())
            ray_id = np.repeat(np.arange(stop - start), chunk_counts)
            first = np.zeros(stop - start, dtype=np.int64)
            first[1:] = np.cumsum(chunk_counts)[:-1]
            k = np.arange(total, dtype=np.int64) - first[ray_id]
            t = k.astype(np.float64) * eps
            pos = origin[None, :] + u[start:stop][ray_id] * t[:, None]
            packed = _pack_keys(np.floor(pos / res).astype(np.int64))
            keep = np.empty(total, dtype=bool)
            keep[0] = True
            keep[1:] = packed[1:] != packed[:-1]
            keep |= k == 0
            collected.append(packed[keep])
            start = stop
        return np.unique(np.concatenate(collected))

    def raycast(
        self, origin, direction, max_range: float
    ) -> tuple[list[VoxelKey], VoxelKey | None]:
        """Voxels visited from origin along a unit direction, stopping at the
        first Occupied voxel (included) or at max_range.
        """
        origin = np.asarray(origin, dtype=float).reshape(3)
        direction = np.asarray(direction, dtype=float).reshape(3)
        if not (np.isfinite(origin).all() and np.isfinite(direction).all()):
            raise ValueError("origin and direction must be finite")
        norm = math.sqrt(float((direction * direction).sum()))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"direction must be unit-norm, |d| = {norm}")
        if not (math.isfinite(max_range) and max_range > 0.0):
            raise ValueError("max_range must be positive")
        res = self.resolution
        eps = res / 20.0
        n = math.ceil(max_range / eps)
        t = np.arange(n, dtype=np.float64) * eps
        pos = origin[None, :] + direction[None, :] * t[:, None]
        packed = _pack_keys(np.floor(pos / res).astype(np.int64))
        keep = np.empty(n, dtype=bool)
        keep[0] = True
        keep[1:] = packed[1:] != packed[:-1]
        packed = packed[keep]
        occupied = np.zeros(len(packed), dtype=bool)
        if len(self._packed):
            rows = np.searchsorted(self._packed, packed)
            rows_c = np.minimum(rows, len(self._packed) - 1)
            exists = self._packed[rows_c] == packed
            occupied = exists & (self._occ[rows_c] > 0.0)
        if occupied.any():
            cut = int(np.argmax(occupied)) + 1
            packed = packed[:cut]
            hit_row = packed[-1]
        else:
            hit_row = None
        keys3 = _unpack_keys(packed)
        visited = [tuple(int(v) for v in row) for row in keys3]
        hit = visited[-1] if hit_row is not None else None
        return visited, hit

    # -- insertion ----------------------------------------------------------

    def insert_labeled_cloud(self, origin, points, roi_flags) -> None:
        """Integrate one labeled point cloud taken from ``origin``.

        Every voxel sampled strictly between the origin voxel and a point's
        endpoint voxel receives one miss update; endpoint voxels receive one
        hit update (a voxel in both sets only gets the hit). The ROI channel
        is touched at endpoints only: voxels ending at least one ROI point get
        one ROI hit, remaining endpoint voxels one ROI miss.
        """
        origin = np.asarray(origin, dtype=float).reshape(3)
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        roi_flags = np.asarray(roi_flags, dtype=bool).reshape(-1)
        if len(points) != len(roi_flags):
            raise ValueError("points and roi_flags length mismatch")
        if not np.isfinite(origin).all():
            raise ValueError("origin must be finite")
        if not np.isfinite(points).all():
            raise ValueError("cloud contains non-finite points")
        if len(points) == 0:
            return
        res = self.resolution
        end_packed = _pack_keys(np.floor(points / res).astype(np.int64))
        occupied = np.unique(end_packed)
        visited = self._visited_packed(origin, points)
        origin_packed = int(
            _pack_keys(np.floor(origin / res).astype(np.int64)[None, :])[0]
        )
        free = np.setdiff1d(visited, occupied, assume_unique=True)
        free = free[free != origin_packed]
        roi_set = np.unique(end_packed[roi_flags])
        nonroi_set = np.setdiff1d(
            np.unique(end_packed[~roi_flags]), roi_set, assume_unique=True
        )
        params = self.params
        self._ensure_nodes(np.concatenate([occupied, free]))
        self._bump(occupied, occ_delta=params.hit_logodds)
        self._bump(free, occ_delta=params.miss_logodds)
        self._bump(roi_set, roi_delta=params.roi_hit_logodds)
        self._bump(nonroi_set, roi_delta=params.roi_miss_logodds)
        self._snapshot_cache = None

    def _ensure_nodes(self, packed: np.ndarray) -> None:
        keys = np.unique(packed)
        if len(self._packed):
            pos = np.searchsorted(self._packed, keys)
            pos_c = np.minimum(pos, len(self._packed) - 1)
            new = keys[self._packed[pos_c] != keys]
        else:
            new = keys
        if len(new):
            ins = np.searchsorted(self._packed, new)
            self._packed = np.insert(self._packed, ins, new)
            self._occ = np.insert(self._occ, ins, np.float32(0.0))
            self._roi = np.insert(self._roi, ins, np.float32(0.0))

    def _bump(self, keys: np.ndarray, occ_delta=None, roi_delta=None) -> None:
        if len(keys) == 0:
            return
        rows = np.searchsorted(self._packed, keys)
        lo = np.float32(self.params.min_logodds)
        hi = np.float32(self.params.max_logodds)
        if occ_delta is not None:
            self._occ[rows] = np.clip(self._occ[rows] + np.float32(occ_delta), lo, hi)
        if roi_delta is not None:
            self._roi[rows] = np.clip(self._roi[rows] + np.float32(roi_delta), lo, hi)

    # -- dense view ---------------------------------------------------------

    def snapshot(self) -> MapSnapshot:
        """Dense frozen view of the current nodes (cached until mutation)."""
        if self._snapshot_cache is None:
            self._snapshot_cache = self._build_snapshot()
        return self._snapshot_cache

    def _build_snapshot(self) -> MapSnapshot:
        if len(self._packed) == 0:
            return MapSnapshot(
                self.resolution,
                np.zeros(3, dtype=np.int64),
                np.zeros((0, 0, 0), dtype=np.uint8),
                np.zeros((0, 0, 0), dtype=bool),
            )
        keys3 = _unpack_keys(self._packed)
        lo = keys3.min(axis=0)
        hi = keys3.max(axis=0)
        shape = hi - lo + 1
        if int(np.prod(shape)) > _MAX_SNAPSHOT_CELLS:
            raise ValueError(f"snapshot grid too large: {tuple(shape)}")
        state = np.zeros(tuple(shape), dtype=np.uint8)
        roi = np.zeros(tuple(shape), dtype=bool)
        idx = keys3 - lo
        values = np.where(
            self._occ > 0.0,
            np.uint8(VoxelState.OCCUPIED),
            np.where(self._occ < 0.0, np.uint8(VoxelState.FREE), np.uint8(0)),
        )
        state[idx[:, 0], idx[:, 1], idx[:, 2]] = values
        roi[idx[:, 0], idx[:, 1], idx[:, 2]] = self._roi > np.float32(
            self.params.roi_threshold
        )
        return MapSnapshot(self.resolution, lo, state, roi)

    # -- serialization ------------------------------------------------------

    def serialize(self) -> bytes:
        """Little-endian binary dump: magic, resolution, count, sorted nodes."""
        n = len(self._packed)
        header = _MAGIC + struct.pack("<d", self.resolution) + struct.pack("<Q", n)
        rec = np.empty(n, dtype=_NODE_DTYPE)
        keys3 = _unpack_keys(self._packed)
        rec["i"] = keys3[:, 0]
        rec["j"] = keys3[:, 1]
        rec["k"] = keys3[:, 2]
        rec["occ"] = self._occ
        rec["roi"] = self._roi
        return header + rec.tobytes()

    @classmethod
    def deserialize(cls, data: bytes, params: MapParams | None = None) -> "RoiMap":
        if len(data) < 24:
            raise MapFormatError("map data shorter than the header")
        if data[:8] != _MAGIC:
            raise MapFormatError("bad magic bytes")
        (resolution,) = struct.unpack_from("<d", data, 8)
        (count,) = struct.unpack_from("<Q", data, 16)
        if not (math.isfinite(resolution) and resolution > 0.0):
            raise MapFormatError(f"invalid resolution {resolution}")
        expected = 24 + count * _NODE_DTYPE.itemsize
        if len(data) != expected:
            raise MapFormatError(
                f"expected {expected} bytes for {count} nodes, got {len(data)}"
            )
        rec = np.frombuffer(data, dtype=_NODE_DTYPE, count=count, offset=24)
        keys3 = np.stack(
            [rec["i"].astype(np.int64), rec["j"].astype(np.int64),
             rec["k"].astype(np.int64)],
            axis=1,
        )
        try:
            packed = _pack_keys(keys3)
        except ValueError as exc:
            raise MapFormatError(str(exc)) from exc
        order = np.argsort(packed, kind="stable")
        packed = packed[order]
        if len(packed) > 1 and (packed[1:] == packed[:-1]).any():
            raise MapFormatError("duplicate voxel keys")
        out = cls(resolution, params)
        out._packed = packed
        out._occ = rec["occ"][order].astype(np.float32)
        out._roi = rec["roi"][order].astype(np.float32)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, RoiMap):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and np.array_equal(self._packed, other._packed)
            and np.array_equal(self._occ, other._occ)
            and np.array_equal(self._roi, other._roi)
        )

    def __repr__(self) -> str:
        return (
            f"RoiMap(resolution={self.resolution}, nodes={self.node_count}, "
            f"roi={self.roi_count})"
        )
