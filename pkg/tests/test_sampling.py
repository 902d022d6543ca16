"""Frontier extraction and candidate sampling tests.

Frontier results are checked against a brute-force per-voxel oracle that only
uses the public single-key map accessors.
"""

import numpy as np
import pytest
from scipy import stats

from roi_nbv.sampling import (
    Box,
    Candidate,
    SphericalShell,
    find_exploration_frontiers,
    find_roi_frontiers,
    sample_candidates,
)
from roi_nbv.voxel_map import MapParams, RoiMap, VoxelState, neighbors

RES = 0.05


def oracle_frontiers(vm, kind, region=None):
    out = []
    for key in vm.keys():
        if vm.state_of(key) != VoxelState.FREE:
            continue
        nbs = neighbors(key, 6)
        if not any(vm.state_of(nb) == VoxelState.UNKNOWN for nb in nbs):
            continue
        if kind == "roi":
            if not any(vm.is_roi(nb) for nb in nbs):
                continue
        else:
            if not any(vm.state_of(nb) == VoxelState.OCCUPIED for nb in nbs):
                continue
        if region is not None:
            center = (np.asarray(key) + 0.5) * vm.resolution
            if not region.contains_point(center):
                continue
        out.append(key)
    return sorted(out)


def as_tuples(keys):
    return [tuple(int(v) for v in row) for row in keys]


def random_map(seed, density=0.4, span=6):
    rng = np.random.default_rng(seed)
    vm = RoiMap(RES)
    for i in range(-span, span):
        for j in range(-span, span):
            for k in range(-2, 3):
                if rng.random() < density:
                    occ = rng.uniform(-3.5, 3.5)
                    if rng.random() < 0.1:
                        occ = 0.0  # stored but still Unknown
                    vm.set_node((i, j, k), occ, rng.uniform(-3.5, 3.5))
    return vm


class TestRegions:
    def test_box_contains_inclusive(self):
        box = Box((0.0, 0.0, 0.0), (1.0, 2.0, 3.0))
        assert box.contains_point((0.0, 0.0, 0.0))
        assert box.contains_point((1.0, 2.0, 3.0))
        assert not box.contains_point((1.0001, 2.0, 3.0))
        flags = box.contains(np.array([[0.5, 0.5, 0.5], [-0.1, 0.5, 0.5]]))
        assert flags.tolist() == [True, False]

    def test_box_inflate(self):
        box = Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)).inflate(0.5)
        assert box.contains_point((-0.5, -0.5, -0.5))
        assert box.contains_point((1.5, 1.5, 1.5))
        assert not box.contains_point((1.6, 0.0, 0.0))

    def test_box_validation(self):
        with pytest.raises(ValueError):
            Box((0.0, 0.0, 0.0), (-1.0, 1.0, 1.0))

    def test_shell_contains(self):
        shell = SphericalShell((1.0, 0.0, 0.0), 0.5, 1.0)
        assert shell.contains_point((1.0, 0.0, 0.5))
        assert shell.contains_point((2.0, 0.0, 0.0))
        assert not shell.contains_point((1.0, 0.0, 0.0))  # inside the hole
        assert not shell.contains_point((2.1, 0.0, 0.0))

    def test_shell_inflate_clamps_inner(self):
        shell = SphericalShell((0.0, 0.0, 0.0), 0.2, 1.0).inflate(0.5)
        assert shell.inner_radius == 0.0
        assert shell.outer_radius == 1.5

    def test_bounds_enclose_regions(self):
        lo, hi = Box((0.0, 0.0, 0.0), (1.0, 2.0, 3.0)).bounds
        assert lo == pytest.approx((0.0, 0.0, 0.0))
        assert hi == pytest.approx((1.0, 2.0, 3.0))
        lo, hi = SphericalShell((1.0, 1.0, 1.0), 0.2, 0.5).bounds
        assert lo == pytest.approx((0.5, 0.5, 0.5))
        assert hi == pytest.approx((1.5, 1.5, 1.5))

    def test_shell_validation(self):
        with pytest.raises(ValueError):
            SphericalShell((0.0, 0.0, 0.0), 1.0, 0.5)
        with pytest.raises(ValueError):
            SphericalShell((0.0, 0.0, 0.0), -0.1, 0.5)


class TestFrontiers:
    def corridor_map(self, roi_positive=True):
        vm = RoiMap(RES)
        for i in range(5):
            vm.set_node((i, 0, 0), -1.0, -1.0)
        vm.set_node((5, 0, 0), 2.0, 1.0 if roi_positive else -1.0)
        return vm

    def test_corridor_example(self):
        vm = self.corridor_map()
        assert as_tuples(find_roi_frontiers(vm)) == [(4, 0, 0)]
        assert as_tuples(find_exploration_frontiers(vm)) == [(4, 0, 0)]

    def test_roi_frontier_requires_roi_evidence(self):
        vm = self.corridor_map(roi_positive=False)
        assert len(find_roi_frontiers(vm)) == 0
        assert as_tuples(find_exploration_frontiers(vm)) == [(4, 0, 0)]

    def test_free_voxel_between_known_space_is_not_frontier(self):
        vm = self.corridor_map()
        # Bury (4,0,0): make every 6-neighbor known.
        for nb in neighbors((4, 0, 0), 6):
            if vm.state_of(nb) == VoxelState.UNKNOWN:
                vm.set_node(nb, -1.0, -1.0)
        assert (4, 0, 0) not in as_tuples(find_roi_frontiers(vm))

    def test_unknown_outside_stored_bounds_counts(self):
        vm = RoiMap(RES)
        vm.set_node((0, 0, 0), -1.0, -1.0)
        vm.set_node((1, 0, 0), 2.0, 2.0)
        assert as_tuples(find_roi_frontiers(vm)) == [(0, 0, 0)]

    def test_empty_map(self):
        vm = RoiMap(RES)
        assert find_roi_frontiers(vm).shape == (0, 3)
        assert find_exploration_frontiers(vm).shape == (0, 3)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_matches_oracle_on_random_maps(self, seed):
        vm = random_map(seed)
        assert as_tuples(find_roi_frontiers(vm)) == oracle_frontiers(vm, "roi")
        assert as_tuples(find_exploration_frontiers(vm)) == oracle_frontiers(vm, "occ")

    def test_region_filter_matches_oracle(self):
        vm = random_map(7)
        region = SphericalShell((0.0, 0.0, 0.0), 0.05, 0.22)
        assert as_tuples(find_roi_frontiers(vm, region)) == oracle_frontiers(
            vm, "roi", region
        )
        box = Box((-0.2, -0.2, -0.1), (0.2, 0.2, 0.1))
        assert as_tuples(find_exploration_frontiers(vm, box)) == oracle_frontiers(
            vm, "occ", box
        )

    def test_frontiers_from_inserted_cloud_match_oracle(self):
        vm = RoiMap(RES)
        rng = np.random.default_rng(12)
        points = rng.uniform(0.3, 0.6, size=(60, 3))
        vm.insert_labeled_cloud(np.zeros(3), points, rng.random(60) < 0.4)
        assert as_tuples(find_roi_frontiers(vm)) == oracle_frontiers(vm, "roi")
        assert as_tuples(find_exploration_frontiers(vm)) == oracle_frontiers(vm, "occ")


class TestSampleCandidates:
    OPEN = Box((-10.0, -10.0, -10.0), (10.0, 10.0, 10.0))

    def frontier_setup(self):
        vm = RoiMap(RES)
        vm.set_node((0, 0, 0), -1.0, -1.0)
        keys = np.array([[0, 0, 0]], dtype=np.int64)
        return vm, keys

    def test_basic_properties(self):
        vm, keys = self.frontier_setup()
        rng = np.random.default_rng(0)
        cands = sample_candidates(vm, keys, 40, self.OPEN, rng)
        assert len(cands) == 40
        center = (np.array([0, 0, 0]) + 0.5) * RES
        for cand in cands:
            assert isinstance(cand, Candidate)
            assert cand.target_key == (0, 0, 0)
            assert np.allclose(cand.target_point, center)
            offset = cand.pose.position - center
            dist = np.linalg.norm(offset)
            assert 0.3 <= dist <= 1.0
            assert np.allclose(cand.pose.forward, -offset / dist)
            assert self.OPEN.contains_point(cand.pose.position)

    def test_targets_drawn_from_all_frontiers(self):
        vm, _ = self.frontier_setup()
        keys = np.array([[0, 0, 0], [8, 0, 0], [0, 8, 0]], dtype=np.int64)
        cands = sample_candidates(vm, keys, 120, self.OPEN, np.random.default_rng(1))
        seen = {c.target_key for c in cands}
        assert seen == {(0, 0, 0), (8, 0, 0), (0, 8, 0)}

    def test_deterministic_for_seed(self):
        vm, keys = self.frontier_setup()
        a = sample_candidates(vm, keys, 10, self.OPEN, np.random.default_rng(5))
        b = sample_candidates(vm, keys, 10, self.OPEN, np.random.default_rng(5))
        c = sample_candidates(vm, keys, 10, self.OPEN, np.random.default_rng(6))
        for x, y in zip(a, b):
            assert np.array_equal(x.pose.position, y.pose.position)
            assert np.array_equal(x.pose.rotation, y.pose.rotation)
        assert not np.array_equal(a[0].pose.position, c[0].pose.position)

    def test_workspace_enforced(self):
        vm, keys = self.frontier_setup()
        workspace = Box((0.1, 0.1, 0.1), (0.9, 0.9, 0.9))
        cands = sample_candidates(vm, keys, 30, workspace, np.random.default_rng(2))
        assert len(cands) > 0
        for cand in cands:
            assert workspace.contains_point(cand.pose.position)

    def test_unreachable_workspace_returns_empty(self):
        vm, keys = self.frontier_setup()
        workspace = Box((50.0, 50.0, 50.0), (51.0, 51.0, 51.0))
        assert sample_candidates(vm, keys, 5, workspace, np.random.default_rng(3)) == []

    def test_occluded_viewpoints_rejected(self):
        vm, keys = self.frontier_setup()
        # Occupied wall one voxel layer in +x, wide enough that no standoff
        # distance within 1 m can see around it.
        for j in range(-25, 26):
            for k in range(-25, 26):
                vm.set_node((1, j, k), 2.0, -1.0)
        cands = sample_candidates(vm, keys, 25, self.OPEN, np.random.default_rng(4))
        assert len(cands) > 0
        center = (np.array([0, 0, 0]) + 0.5) * RES
        for cand in cands:
            offset = center - cand.pose.position
            dist = np.linalg.norm(offset)
            _, hit = vm.raycast(cand.pose.position, offset / dist, dist)
            assert hit is None or hit == (0, 0, 0)
            assert cand.pose.position[0] < RES  # never behind the wall

    def test_distance_distribution_uniform(self):
        vm, keys = self.frontier_setup()
        cands = sample_candidates(vm, keys, 1500, self.OPEN, np.random.default_rng(8))
        center = (np.array([0, 0, 0]) + 0.5) * RES
        dists = np.array([np.linalg.norm(c.pose.position - center) for c in cands])
        result = stats.kstest(dists, stats.uniform(loc=0.3, scale=0.7).cdf)
        assert result.pvalue > 0.01

    def test_directions_cover_sphere(self):
        vm, keys = self.frontier_setup()
        cands = sample_candidates(vm, keys, 1500, self.OPEN, np.random.default_rng(9))
        center = (np.array([0, 0, 0]) + 0.5) * RES
        dirs = np.array(
            [
                (c.pose.position - center) / np.linalg.norm(c.pose.position - center)
                for c in cands
            ]
        )
        assert np.linalg.norm(dirs.mean(axis=0)) < 0.05
        assert (dirs[:, 2] > 0).mean() == pytest.approx(0.5, abs=0.05)

    def test_degenerate_inputs(self):
        vm, keys = self.frontier_setup()
        rng = np.random.default_rng(0)
        assert sample_candidates(vm, keys, 0, self.OPEN, rng) == []
        empty = np.empty((0, 3), dtype=np.int64)
        assert sample_candidates(vm, empty, 5, self.OPEN, rng) == []
        with pytest.raises(ValueError):
            sample_candidates(vm, keys, 5, self.OPEN, rng, distance_range=(0.0, 1.0))
        with pytest.raises(ValueError):
            sample_candidates(vm, keys, 5, self.OPEN, rng, distance_range=(1.0, 0.5))

    def test_custom_distance_range(self):
        vm, keys = self.frontier_setup()
        cands = sample_candidates(
            vm, keys, 20, self.OPEN, np.random.default_rng(10), distance_range=(0.1, 0.2)
        )
        center = (np.array([0, 0, 0]) + 0.5) * RES
        for cand in cands:
            dist = np.linalg.norm(cand.pose.position - center)
            assert 0.1 <= dist <= 0.2
