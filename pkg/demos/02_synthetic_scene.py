"""
Procedural scene and RGB-D rendering
====================================

Generate a two-plant scene, render a view, turn it into a labeled point
cloud and corrupt the labels with detector noise.
"""

import numpy as np

from roi_nbv import (
    CameraModel,
    PlantConfig,
    SceneConfig,
    apply_detection_noise,
    cloud_from_render,
    generate_scene,
    orientation_towards,
    render,
)

config = SceneConfig(
    resolution=0.01,
    room_min=(-1.5, -1.5, 0.0),
    room_max=(1.5, 1.5, 2.0),
    plants=(
        PlantConfig(position=(-0.3, 0.0, 0.0), fruit_count=5),
        PlantConfig(position=(0.3, 0.0, 0.0), fruit_count=3),
    ),
    floor_thickness=0.02,
)

# Same seed, same scene, voxel for voxel.
scene = generate_scene(config, seed=7)
print(f"occupied voxels {scene.occupied_count}, fruits {len(scene.fruit_gt)}")
for fid, fruit in sorted(scene.fruit_gt.items())[:3]:
    print(f"  fruit {fid}: centroid {np.round(fruit.centroid, 3)} "
          f"box volume {fruit.aabb_volume * 1e6:.0f} cm^3")

camera = CameraModel(width=120, height=90)
pose = orientation_towards([0.0, -1.1, 0.7], scene.centroid)
result = render(scene, camera, pose)

valid = result.valid
print(f"\nrendered {camera.width}x{camera.height}, {valid.sum()} pixels hit")
print(f"depth range {result.depth[valid].min():.2f} .. {result.depth[valid].max():.2f} m")

# Coarse ASCII sketch of the depth image, nearest surfaces darkest.
chars = np.full((camera.height, camera.width), " ")
shades = np.array(list("@#+-."))
norm = (result.depth - result.depth[valid].min()) / np.ptp(result.depth[valid])
chars[valid] = shades[np.clip((norm[valid] * 4).astype(int), 0, 4)]
for row in chars[::6, ::2]:
    print("".join(row))

# Back-project to a cloud downsampled to the mapping resolution. Each point
# keeps a fruit/not-fruit flag from the HSI color filter.
cloud = cloud_from_render(result, camera, pose, map_resolution=0.02)
print(f"cloud: {len(cloud)} points, {cloud.is_roi.sum()} flagged as fruit")

# The simulated detector is imperfect; flags flip with fixed rates.
noisy = apply_detection_noise(cloud, false_positive_rate=0.02,
                              false_negative_rate=0.1, seed=7)
flipped = (noisy.is_roi != cloud.is_roi).sum()
print(f"after noise: {noisy.is_roi.sum()} flagged, {flipped} labels flipped")
