"""Next-best-view planning for fruit mapping in simulated plant scenes.

The package builds a dual-probability (occupancy + region-of-interest) voxel
map from synthetic RGB-D views, samples viewpoint candidates at ROI and
exploration frontiers, scores them with information-gain utilities, and runs
budgeted planning trials with ground-truth evaluation.
"""

from .analysis import (
    FruitCluster,
    MetricReport,
    cluster_rois,
    compute_metrics,
    mann_whitney_u_one_sided,
    match_clusters,
)
from .config import Scenario, ScenarioError, load_scenario
from .gain import (
    EvalParams,
    EvaluatedCandidate,
    RayGrid,
    RoiDistanceField,
    UtilType,
    evaluate,
    ig_proximity,
    ig_unobserved,
    move_cost,
    nearest_roi_distance,
    proximity_weight,
    utility,
)
from .geometry import ViewPose, orientation_towards
from .planner import (
    MoveRecord,
    PlannerConfig,
    PlannerMode,
    SnapshotRecord,
    TrialLog,
    attempt_move,
    initial_pose,
    plan_iteration,
    run_trial,
)
from .sampling import (
    Box,
    Region,
    SphericalShell,
    Candidate,
    find_exploration_frontiers,
    find_roi_frontiers,
    sample_candidates,
)
from .sensor_sim import (
    CameraModel,
    GroundTruthFruit,
    GroundTruthScene,
    LabeledCloud,
    PlantConfig,
    SceneConfig,
    apply_detection_noise,
    cloud_from_render,
    generate_scene,
    hsi_is_fruit,
    read_fruit_table,
    render,
    rgb_to_hsi,
    write_fruit_table,
)
from .voxel_map import MapParams, RoiMap, VoxelState

__all__ = [
    "Box",
    "CameraModel",
    "Candidate",
    "EvalParams",
    "EvaluatedCandidate",
    "FruitCluster",
    "GroundTruthFruit",
    "GroundTruthScene",
    "LabeledCloud",
    "MapParams",
    "MetricReport",
    "MoveRecord",
    "PlannerConfig",
    "PlannerMode",
    "PlantConfig",
    "RayGrid",
    "Region",
    "RoiDistanceField",
    "RoiMap",
    "Scenario",
    "ScenarioError",
    "SceneConfig",
    "SnapshotRecord",
    "SphericalShell",
    "TrialLog",
    "UtilType",
    "ViewPose",
    "VoxelState",
    "apply_detection_noise",
    "attempt_move",
    "cloud_from_render",
    "cluster_rois",
    "compute_metrics",
    "evaluate",
    "find_exploration_frontiers",
    "find_roi_frontiers",
    "generate_scene",
    "hsi_is_fruit",
    "ig_proximity",
    "ig_unobserved",
    "initial_pose",
    "load_scenario",
    "mann_whitney_u_one_sided",
    "match_clusters",
    "move_cost",
    "nearest_roi_distance",
    "orientation_towards",
    "plan_iteration",
    "proximity_weight",
    "read_fruit_table",
    "render",
    "rgb_to_hsi",
    "run_trial",
    "sample_candidates",
    "utility",
    "write_fruit_table",
]
