"""
Frontier sampling and information gain
======================================

Seed a map with one observation, extract the two frontier families and score
sampled viewpoints under both utility flavors.
"""

import numpy as np

from roi_nbv import (
    Box,
    CameraModel,
    EvalParams,
    PlantConfig,
    RayGrid,
    RoiMap,
    SceneConfig,
    UtilType,
    cloud_from_render,
    evaluate,
    find_exploration_frontiers,
    find_roi_frontiers,
    generate_scene,
    orientation_towards,
    render,
    sample_candidates,
)

RES = 0.02

scene = generate_scene(
    SceneConfig(
        resolution=0.01,
        room_min=(-1.5, -1.5, 0.0),
        room_max=(1.5, 1.5, 2.0),
        plants=(PlantConfig(position=(0.0, 0.0, 0.0), fruit_count=6),),
        floor_thickness=0.02,
    ),
    seed=3,
)

camera = CameraModel(width=120, height=90)
pose = orientation_towards([0.0, -0.9, 0.7], scene.centroid)

vm = RoiMap(RES)
cloud = cloud_from_render(render(scene, camera, pose), camera, pose, RES)
vm.insert_labeled_cloud(cloud.origin, cloud.positions, cloud.is_roi)
print(f"after one view: {vm.known_count} known voxels, {vm.roi_count} ROI voxels")

# Exploration frontiers are Free voxels touching both Unknown and Occupied
# space; ROI frontiers touch Unknown and a detected fruit voxel instead.
explo = find_exploration_frontiers(vm)
roi = find_roi_frontiers(vm)
print(f"exploration frontiers {len(explo)}, ROI frontiers {len(roi)}")

# Sample collision-free viewpoints aimed at random frontier voxels.
workspace = Box((-1.4, -1.4, 0.1), (1.4, 1.4, 1.6))
rng = np.random.default_rng(3)
cands = sample_candidates(vm, roi, 40, workspace, rng, distance_range=(0.3, 0.9))
print(f"sampled {len(cands)} ROI-frontier candidates")

# Score them twice. The unobserved flavor counts unknown voxels per ray; the
# proximity flavor weights each unknown voxel by its distance to known ROI.
rays = RayGrid.from_camera(camera, rows=12, cols=16)
for util_type in (UtilType.UNOBSERVED, UtilType.PROXIMITY):
    params = EvalParams(util_type=util_type, max_dist=0.1, alpha=0.05, eval_range=1.5)
    scored = evaluate(cands, vm, pose, camera, params, rays)
    best = max(scored, key=lambda s: s.utility)
    print(f"\n{util_type.value}: best utility {best.utility:.3f} "
          f"(ig {best.ig:.3f}, cost {best.cost:.2f} m)")
    for s in sorted(scored, key=lambda s: -s.utility)[:3]:
        p = s.pose.position
        print(f"  u={s.utility:.3f} ig={s.ig:.3f} from ({p[0]:+.2f}, {p[1]:+.2f}, {p[2]:+.2f})")
