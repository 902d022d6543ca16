"""ROI clustering, ground-truth matching, trial metrics, and a rank test."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np
from scipy import ndimage
from scipy.stats import rankdata

from .voxel_map import RoiMap

if TYPE_CHECKING:
    from .sensor_sim import GroundTruthFruit

# Detected/ground-truth centroid pairs further apart than this never match.
MATCH_DISTANCE_M = 0.2

_STRUCTURE_26 = np.ones((3, 3, 3), dtype=bool)
# Absorbs float wobble when snapping box faces to the voxel lattice; must stay
# far below half a voxel at any sane resolution.
_EDGE_EPS = 1e-9


@dataclass(eq=False)
class FruitCluster:
    """One maximal 26-connected component of ROI voxels."""

    voxels: frozenset
    centroid: np.ndarray
    aabb_min: np.ndarray
    aabb_max: np.ndarray

    @property
    def volume(self) -> float:
        return float(np.prod(self.aabb_max - self.aabb_min))


@dataclass(frozen=True)
class MetricReport:
    """Per-trial summary; fields are None when undefined for the input."""

    detected_rois: int
    center_distance: float | None
    volume_accuracy: float | None
    covered_roi_volume: float | None


def cluster_rois(vm: RoiMap) -> list[FruitCluster]:
    """Partition the map's ROI voxels into 26-connected components.

    The AABB is inflated by half a voxel per side so a single-voxel cluster
    has volume resolution**3 instead of zero. Output is sorted by centroid
    so it is independent of voxel iteration order.
    """
    keys = vm.roi_key_array()
    if len(keys) == 0:
        return []
    lo = keys.min(axis=0)
    grid = np.zeros(keys.max(axis=0) - lo + 1, dtype=bool)
    idx = keys - lo
    grid[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    labels, count = ndimage.label(grid, structure=_STRUCTURE_26)
    res = vm.resolution
    half = res / 2.0
    # One grouping pass instead of a per-label scan; the stable sort keeps
    # each label's cells in grid order, as a per-label argwhere would.
    cells_all = np.argwhere(grid)
    labels_at = labels[cells_all[:, 0], cells_all[:, 1], cells_all[:, 2]]
    order = np.argsort(labels_at, kind="stable")
    cells_all = cells_all[order] + lo
    starts = np.searchsorted(labels_at[order], np.arange(1, count + 2))
    clusters = []
    for lab in range(count):
        cells = cells_all[starts[lab] : starts[lab + 1]]
        centers = (cells + 0.5) * res
        clusters.append(
            FruitCluster(
                voxels=frozenset(map(tuple, cells.tolist())),
                centroid=centers.mean(axis=0),
                aabb_min=centers.min(axis=0) - half,
                aabb_max=centers.max(axis=0) + half,
            )
        )
    clusters.sort(key=lambda c: tuple(c.centroid))
    return clusters


def match_clusters(
    detected: Sequence[FruitCluster],
    fruit_gt: Mapping[int, "GroundTruthFruit"],
) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching by ascending centroid distance.

    Only pairs closer than MATCH_DISTANCE_M are considered; ties are broken
    by (detected index, fruit id). Returns (detected_idx, fruit_id, distance)
    triples in acceptance order.
    """
    pairs = []
    for di, det in enumerate(detected):
        for fid in sorted(fruit_gt):
            gt_centroid = np.asarray(fruit_gt[fid].centroid, dtype=np.float64)
            dist = float(np.linalg.norm(det.centroid - gt_centroid))
            if dist < MATCH_DISTANCE_M:
                pairs.append((dist, di, fid))
    pairs.sort()
    taken_det: set[int] = set()
    taken_gt: set[int] = set()
    matches = []
    for dist, di, fid in pairs:
        if di in taken_det or fid in taken_gt:
            continue
        taken_det.add(di)
        taken_gt.add(fid)
        matches.append((di, fid, dist))
    return matches


def _mark_boxes(mask, boxes, lo_key, res):
    # A cell belongs to a box when its center does; boundary wobble is pulled
    # onto the lattice by _EDGE_EPS.
    for bmin, bmax in boxes:
        lo = np.ceil(np.asarray(bmin) / res - 0.5 - _EDGE_EPS).astype(np.int64)
        hi = np.floor(np.asarray(bmax) / res - 0.5 + _EDGE_EPS).astype(np.int64) + 1
        lo = np.maximum(lo - lo_key, 0)
        hi = np.minimum(hi - lo_key, mask.shape)
        if (lo < hi).all():
            mask[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] = True


def compute_metrics(
    detected: Sequence[FruitCluster],
    fruit_gt: Mapping[int, "GroundTruthFruit"],
    map_resolution: float,
) -> MetricReport:
    """Score detected clusters against ground-truth fruits.

    detected_rois is the matched-pair count. center_distance and
    volume_accuracy average over matched pairs and are None without matches.
    covered_roi_volume is |union(detected AABBs) in union(gt AABBs)| over
    |union(gt AABBs)|, both voxelized at map_resolution; None when there is
    no ground truth, 0.0 when nothing was detected.
    """
    matches = match_clusters(detected, fruit_gt)
    if matches:
        center_distance = float(np.mean([m[2] for m in matches]))
        accs = []
        for di, fid, _ in matches:
            v_gt = float(fruit_gt[fid].aabb_volume)
            accs.append(max(0.0, 1.0 - abs(detected[di].volume - v_gt) / v_gt))
        volume_accuracy = float(np.mean(accs))
    else:
        center_distance = None
        volume_accuracy = None

    if not fruit_gt:
        covered = None
    elif not detected:
        covered = 0.0
    else:
        res = map_resolution
        gt_boxes = [
            (np.asarray(g.aabb_min, dtype=np.float64), np.asarray(g.aabb_max, dtype=np.float64))
            for g in fruit_gt.values()
        ]
        # The intersection lives inside the ground-truth union, so the grid
        # only needs to span the ground-truth boxes.
        all_min = np.min([b[0] for b in gt_boxes], axis=0)
        all_max = np.max([b[1] for b in gt_boxes], axis=0)
        lo_key = np.floor(all_min / res).astype(np.int64) - 1
        shape = tuple(np.ceil(all_max / res).astype(np.int64) + 2 - lo_key)
        gt_mask = np.zeros(shape, dtype=bool)
        det_mask = np.zeros(shape, dtype=bool)
        _mark_boxes(gt_mask, gt_boxes, lo_key, res)
        _mark_boxes(det_mask, [(c.aabb_min, c.aabb_max) for c in detected], lo_key, res)
        denom = int(gt_mask.sum())
        covered = float((gt_mask & det_mask).sum() / denom)
    return MetricReport(
        detected_rois=len(matches),
        center_distance=center_distance,
        volume_accuracy=volume_accuracy,
        covered_roi_volume=covered,
    )


def mann_whitney_u_one_sided(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """U statistic for sample a and one-sided p (alternative: a > b).

    Uses exact enumeration for tie-free pooled samples of at most 12 values,
    otherwise an upper-tail normal approximation with midranks, tie-corrected
    variance, and continuity correction. Tied samples landing exactly on the
    null mean (identical samples in particular) score 0.5 by symmetry.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if not a or not b:
        raise ValueError("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    n = n1 + n2
    pooled = np.array(a + b, dtype=np.float64)
    if not np.isfinite(pooled).all():
        raise ValueError("samples must be finite")
    ranks = rankdata(pooled)
    u_a = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    values, tie_counts = np.unique(pooled, return_counts=True)
    if len(values) == 1:
        return u_a, 0.5
    if n <= 12 and len(values) == n:
        u_obs = int(round(u_a))
        base = n1 * (n1 + 1) // 2
        hits = total = 0
        for comb in itertools.combinations(range(1, n + 1), n1):
            total += 1
            if sum(comb) - base >= u_obs:
                hits += 1
        return u_a, hits / total
    mean = n1 * n2 / 2.0
    d = u_a - mean
    if d == 0.0 and len(values) < n:
        return u_a, 0.5
    tie_term = float((tie_counts.astype(np.float64) ** 3 - tie_counts).sum()) / (n * (n - 1))
    sigma = math.sqrt(n1 * n2 / 12.0 * ((n + 1) - tie_term))
    z = (d - 0.5) / sigma
    return u_a, 0.5 * math.erfc(z / math.sqrt(2.0))
