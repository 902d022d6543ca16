"""Budgeted next-best-view planning loop over the simulated scene.

One iteration samples candidate viewpoints from both frontier families,
ranks them by utility, executes the best reachable one against a simple
teleport-with-cost motion model, and folds the resulting observation into
the map. Time is simulated seconds, so trials are machine independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .analysis import cluster_rois, compute_metrics
from .gain import EvalParams, RayGrid, evaluate
from .geometry import ViewPose, orientation_towards
from .sampling import (
    DEFAULT_DISTANCE_RANGE,
    Box,
    Region,
    SphericalShell,
    find_exploration_frontiers,
    find_roi_frontiers,
    sample_candidates,
)
from .sensor_sim import (
    CameraModel,
    GroundTruthScene,
    apply_detection_noise,
    cloud_from_render,
    render,
)
from .voxel_map import MapParams, RoiMap

# Charged when a popped candidate fails the workspace re-check.
FAILED_MOVE_PENALTY_S = 0.1

CSV_COLUMNS = (
    "time",
    "kind",
    "utility",
    "known_voxels",
    "roi_voxels",
    "detected_rois",
    "covered_roi_volume",
    "volume_accuracy",
    "center_distance",
)


class PlannerMode(Enum):
    COMBINED = "combined"
    EXPLORATION_ONLY = "exploration_only"


@dataclass(frozen=True)
class PlannerConfig:
    """Everything a trial needs besides the scene and the seed."""

    workspace: Region
    mode: PlannerMode = PlannerMode.COMBINED
    eval: EvalParams = field(default_factory=EvalParams)
    n_vps: int = 100
    budget_s: float = 180.0
    move_speed_m_per_s: float = 0.25
    per_view_overhead_s: float = 1.0
    seed: int = 0
    sampling_region: Region | None = None
    camera: CameraModel = field(default_factory=CameraModel)
    map_resolution: float = 0.01
    map_params: MapParams = field(default_factory=MapParams)
    false_positive_rate: float = 0.0
    false_negative_rate: float = 0.0
    snapshot_interval_s: float = 5.0
    vp_distance_range: tuple[float, float] = DEFAULT_DISTANCE_RANGE
    ray_rows: int = 15
    ray_cols: int = 20
    initial_position: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not isinstance(self.workspace, Region):
            raise ValueError("workspace must be a Region")
        if not isinstance(self.mode, PlannerMode):
            raise ValueError("mode must be a PlannerMode")
        if not isinstance(self.eval, EvalParams):
            raise ValueError("eval must be an EvalParams")
        if self.n_vps < 1:
            raise ValueError("n_vps must be at least 1")
        if self.budget_s < 0.0:
            raise ValueError("budget_s must be non-negative")
        if self.move_speed_m_per_s <= 0.0:
            raise ValueError("move_speed_m_per_s must be positive")
        # A zero overhead would let empty iterations spin without consuming
        # the budget.
        if self.per_view_overhead_s <= 0.0:
            raise ValueError("per_view_overhead_s must be positive")
        if self.snapshot_interval_s <= 0.0:
            raise ValueError("snapshot_interval_s must be positive")
        if self.map_resolution <= 0.0:
            raise ValueError("map_resolution must be positive")
        for name in ("false_positive_rate", "false_negative_rate"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        lo, hi = self.vp_distance_range
        if not (0.0 < lo <= hi):
            raise ValueError("vp_distance_range must satisfy 0 < lo <= hi")
        if self.ray_rows < 1 or self.ray_cols < 1:
            raise ValueError("ray grid must have at least one row and column")
        if self.initial_position is not None:
            pos = np.asarray(self.initial_position, dtype=np.float64).reshape(3)
            if not np.isfinite(pos).all():
                raise ValueError("initial_position must be finite")
            if not self.workspace.contains_point(pos):
                raise ValueError("initial_position lies outside the workspace")


@dataclass(frozen=True)
class MoveRecord:
    """One executed viewpoint change and the map state right after it."""

    time: float
    kind: str  # "roi" or "exploration"
    utility: float
    known_voxels: int
    roi_voxels: int
    pose: ViewPose
    max_roi_utility: float | None


@dataclass(frozen=True)
class SnapshotRecord:
    """Metric sample at a fixed simulated time."""

    time: float
    known_voxels: int
    roi_voxels: int
    detected_rois: int
    covered_roi_volume: float | None
    volume_accuracy: float | None
    center_distance: float | None


@dataclass(eq=False)
class TrialLog:
    """Chronological move and snapshot records plus the final map."""

    records: list
    final_map: RoiMap
    seed: int
    config: PlannerConfig

    @property
    def moves(self) -> list[MoveRecord]:
        return [r for r in self.records if isinstance(r, MoveRecord)]

    @property
    def snapshots(self) -> list[SnapshotRecord]:
        return [r for r in self.records if isinstance(r, SnapshotRecord)]

    def to_csv(self) -> str:
        def opt(v):
            return "" if v is None else repr(float(v))

        lines = [",".join(CSV_COLUMNS)]
        for r in self.records:
            if isinstance(r, MoveRecord):
                cells = [
                    repr(float(r.time)),
                    r.kind,
                    repr(float(r.utility)),
                    str(r.known_voxels),
                    str(r.roi_voxels),
                    "",
                    "",
                    "",
                    "",
                ]
            else:
                cells = [
                    repr(float(r.time)),
                    "snapshot",
                    "",
                    str(r.known_voxels),
                    str(r.roi_voxels),
                    str(r.detected_rois),
                    opt(r.covered_roi_volume),
                    opt(r.volume_accuracy),
                    opt(r.center_distance),
                ]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="ascii")


@dataclass(eq=False)
class PlannerState:
    """Mutable loop state threaded through plan_iteration calls."""

    pose: ViewPose
    elapsed: float
    rng: np.random.Generator
    records: list = field(default_factory=list)
    next_snapshot: int = 1
    rays: RayGrid | None = None


def initial_pose(config: PlannerConfig, scene: GroundTruthScene) -> ViewPose:
    """Start pose: centered in the workspace, facing the scene centroid."""
    if config.initial_position is not None:
        position = np.asarray(config.initial_position, dtype=np.float64)
    elif isinstance(config.workspace, Box):
        ws = config.workspace
        position = (ws.min_corner + ws.max_corner) / 2.0
    elif isinstance(config.workspace, SphericalShell):
        ws = config.workspace
        mid = (ws.inner_radius + ws.outer_radius) / 2.0
        position = ws.center - np.array([mid, 0.0, 0.0])
    else:
        raise ValueError("cannot derive a start position; set initial_position")
    target = scene.centroid
    if np.allclose(target, position):
        target = position + np.array([1.0, 0.0, 0.0])
    return orientation_towards(position, target)


def attempt_move(state: PlannerState, pose: ViewPose, workspace: Region, config: PlannerConfig):
    """Teleport-with-cost motion model.

    Success requires the pose to lie inside the workspace; the move then
    costs travel time plus the per-view overhead. Failure charges a fixed
    re-plan penalty. Returns (success, charged seconds).
    """
    if workspace.contains_point(pose.position):
        travel = float(np.linalg.norm(pose.position - state.pose.position))
        cost = travel / config.move_speed_m_per_s + config.per_view_overhead_s
        state.elapsed += cost
        state.pose = pose
        return True, cost
    state.elapsed += FAILED_MOVE_PENALTY_S
    return False, FAILED_MOVE_PENALTY_S


def _observe(state: PlannerState, vm: RoiMap, scene: GroundTruthScene, config: PlannerConfig):
    noise_seed = int(state.rng.integers(0, 2**63 - 1))
    result = render(scene, config.camera, state.pose)
    cloud = cloud_from_render(result, config.camera, state.pose, vm.resolution)
    cloud = apply_detection_noise(
        cloud, config.false_positive_rate, config.false_negative_rate, noise_seed
    )
    vm.insert_labeled_cloud(cloud.origin, cloud.positions, cloud.is_roi)


def _snapshot(state: PlannerState, vm: RoiMap, scene: GroundTruthScene, t: float):
    report = compute_metrics(cluster_rois(vm), scene.fruit_gt, vm.resolution)
    state.records.append(
        SnapshotRecord(
            time=t,
            known_voxels=vm.known_count,
            roi_voxels=vm.roi_count,
            detected_rois=report.detected_rois,
            covered_roi_volume=report.covered_roi_volume,
            volume_accuracy=report.volume_accuracy,
            center_distance=report.center_distance,
        )
    )


def _record_due_snapshots(state, vm, scene, config, limit, *, strict=False):
    # strict=True stops short of `limit` itself: snapshots falling exactly on
    # an observation instant are taken after the insertion instead.
    bound = min(limit, config.budget_s)
    while True:
        t = state.next_snapshot * config.snapshot_interval_s
        if t > bound or (strict and t >= limit):
            break
        _snapshot(state, vm, scene, t)
        state.next_snapshot += 1


_RESTART_DRAWS = 64


def _random_restart_pose(state: PlannerState, config: PlannerConfig) -> ViewPose | None:
    """Seeded workspace pose aimed at a random sampling-region point.

    Used when the map offers no frontiers at all (blind start, or fully
    consumed scene), where candidate sampling has nothing to anchor on.
    """
    lo, hi = config.workspace.bounds
    target_region = config.sampling_region if config.sampling_region is not None else config.workspace
    tlo, thi = target_region.bounds
    for _ in range(_RESTART_DRAWS):
        position = state.rng.uniform(lo, hi)
        if not config.workspace.contains_point(position):
            continue
        target = state.rng.uniform(tlo, thi)
        if np.allclose(target, position):
            continue
        return orientation_towards(position, target)
    return None


def _execute_move(state, vm, scene, config, pose, kind, utility, max_roi_utility) -> bool:
    """Move, observe, record; returns True when the move itself succeeded."""
    ok, _ = attempt_move(state, pose, config.workspace, config)
    if not ok:
        _record_due_snapshots(state, vm, scene, config, limit=state.elapsed)
        return False
    arrival = state.elapsed
    if arrival > config.budget_s:
        # The move completes after the cutoff: no observation is taken and
        # nothing is logged for it.
        _record_due_snapshots(state, vm, scene, config, limit=arrival)
        return True
    _record_due_snapshots(state, vm, scene, config, limit=arrival, strict=True)
    _observe(state, vm, scene, config)
    state.records.append(
        MoveRecord(
            time=arrival,
            kind=kind,
            utility=utility,
            known_voxels=vm.known_count,
            roi_voxels=vm.roi_count,
            pose=pose,
            max_roi_utility=max_roi_utility,
        )
    )
    _record_due_snapshots(state, vm, scene, config, limit=arrival)
    return True


def plan_iteration(
    state: PlannerState, vm: RoiMap, scene: GroundTruthScene, config: PlannerConfig
) -> PlannerState:
    """Sample both candidate families, pick a family, move, observe.

    The ROI family is chosen in combined mode when its best utility clears
    the threshold; candidates are then popped best-first until a move
    succeeds. With no frontiers anywhere a seeded restart move is taken
    instead; an iteration that attempts nothing charges one per-view
    overhead so a stalled planner still consumes its budget.
    """
    if state.rays is None:
        state.rays = RayGrid.from_camera(config.camera, rows=config.ray_rows, cols=config.ray_cols)
    threshold = config.eval.utility_threshold

    roi_scored = []
    if config.mode is PlannerMode.COMBINED:
        roi_frontiers = find_roi_frontiers(vm, config.sampling_region)
        roi_cands = sample_candidates(
            vm, roi_frontiers, config.n_vps, config.workspace, state.rng, config.vp_distance_range
        )
        roi_scored = evaluate(roi_cands, vm, state.pose, config.camera, config.eval, state.rays)
    expl_frontiers = find_exploration_frontiers(vm, config.sampling_region)
    expl_cands = sample_candidates(
        vm, expl_frontiers, config.n_vps, config.workspace, state.rng, config.vp_distance_range
    )
    expl_scored = evaluate(expl_cands, vm, state.pose, config.camera, config.eval, state.rays)

    max_roi_utility = max((s.utility for s in roi_scored), default=None)
    use_roi = max_roi_utility is not None and max_roi_utility > threshold
    chosen = roi_scored if use_roi else expl_scored
    kind = "roi" if use_roi else "exploration"

    attempted = False
    for cand in sorted(chosen, key=lambda s: -s.utility):
        if cand.utility <= threshold or state.elapsed >= config.budget_s:
            break
        attempted = True
        if _execute_move(
            state, vm, scene, config, cand.pose, kind, cand.utility, max_roi_utility
        ):
            break
    if (
        not attempted
        and not roi_scored
        and not expl_scored
        and state.elapsed < config.budget_s
    ):
        pose = _random_restart_pose(state, config)
        if pose is not None:
            attempted = True
            _execute_move(state, vm, scene, config, pose, "exploration", 0.0, max_roi_utility)
    if not attempted:
        state.elapsed += config.per_view_overhead_s
        _record_due_snapshots(state, vm, scene, config, limit=state.elapsed)
    return state


def run_trial(scene: GroundTruthScene, config: PlannerConfig, seed: int | None = None) -> TrialLog:
    """Run one budgeted trial; fully determined by (scene, config, seed).

    The initial observation happens at t = 0 and costs nothing. Iterations
    run while elapsed time is below the budget; records never carry
    timestamps past it.
    """
    actual_seed = config.seed if seed is None else int(seed)
    vm = RoiMap(config.map_resolution, config.map_params)
    state = PlannerState(
        pose=initial_pose(config, scene),
        elapsed=0.0,
        rng=np.random.default_rng(actual_seed),
    )
    _observe(state, vm, scene, config)
    while state.elapsed < config.budget_s:
        plan_iteration(state, vm, scene, config)
    _record_due_snapshots(state, vm, scene, config, limit=config.budget_s)
    return TrialLog(records=state.records, final_map=vm, seed=actual_seed, config=config)
