"""
Dual-channel voxel map basics
=============================

Insert a labeled point cloud into a sparse map, inspect the two log-odds
channels, cast a few rays and round-trip the binary format.
"""

import numpy as np

from roi_nbv import MapParams, RoiMap, VoxelState

RES = 0.05

vm = RoiMap(RES, MapParams())

# A fake observation: a slab of plant matter at x ~ 1.0 with a fruit-sized
# blob embedded in it. Points carry a per-point ROI flag (the detector said
# "fruit" for these).
yz = np.mgrid[-0.3:0.3:13j, 0.2:0.8:13j].reshape(2, -1).T
wall = np.column_stack([np.full(len(yz), 1.0), yz])
blob = np.array([[1.0, 0.0, 0.5]]) + RES * np.array(
    [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 1, 1]]
)
points = np.vstack([wall, blob])
flags = np.zeros(len(points), dtype=bool)
flags[len(wall):] = True

origin = np.array([0.0, 0.0, 0.5])
vm.insert_labeled_cloud(origin, points, flags)

print(f"nodes stored      {vm.node_count}")
print(f"known voxels      {vm.known_count}")
print(f"ROI voxels        {vm.roi_count}")

# Voxels along the ray between sensor and wall became Free, the endpoints
# Occupied, everything else stays Unknown.
for p in (origin + [0.5, 0.0, 0.0], [1.0, 0.0, 0.5], [1.0, 5.0, 0.5]):
    key = vm.world_to_key(p)
    print(f"state at {np.round(p, 2)}: {vm.state_of(key).name}, roi={vm.is_roi(key)}")

# raycast returns the visited voxels and the Occupied voxel that stopped the
# ray (None when it ran out of range instead).
visited, terminator = vm.raycast(origin, np.array([1.0, 0.0, 0.0]), max_range=3.0)
print(f"ray +x: visited {len(visited)} voxels, "
      f"stopped at {np.round(vm.key_to_center(terminator), 3)}")
visited, terminator = vm.raycast(origin, np.array([-1.0, 0.0, 0.0]), max_range=3.0)
print(f"ray -x: visited {len(visited)} voxels, terminator {terminator}")

# The wire format preserves both channels bit-exactly.
blob_bytes = vm.serialize()
clone = RoiMap.deserialize(blob_bytes)
assert clone.node_count == vm.node_count and clone.roi_count == vm.roi_count
print(f"serialized {len(blob_bytes)} bytes, round-trip OK")
