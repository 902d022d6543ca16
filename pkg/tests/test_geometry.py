"""Pose construction and FOV grid tests."""

import math

import numpy as np
import pytest

from roi_nbv.geometry import ViewPose, fov_direction_grid, orientation_towards


class TestViewPose:
    def test_identity_defaults(self):
        pose = ViewPose(position=(1.0, 2.0, 3.0))
        assert np.array_equal(pose.rotation, np.eye(3))
        assert np.array_equal(pose.position, [1.0, 2.0, 3.0])

    def test_columns_are_right_down_forward(self):
        rot = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
        pose = ViewPose(position=np.zeros(3), rotation=rot)
        assert np.array_equal(pose.right, rot[:, 0])
        assert np.array_equal(pose.forward, rot[:, 2])
        assert np.array_equal(pose.up, -rot[:, 1])

    def test_rejects_non_orthonormal(self):
        rot = np.eye(3)
        rot[0, 1] = 1e-6
        with pytest.raises(ValueError):
            ViewPose(position=np.zeros(3), rotation=rot)

    def test_rejects_reflection(self):
        rot = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ValueError):
            ViewPose(position=np.zeros(3), rotation=rot)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            ViewPose(position=(np.nan, 0.0, 0.0))


class TestOrientationTowards:
    def test_horizontal_view_keeps_world_up(self):
        pose = orientation_towards((0.0, 0.0, 0.0), (2.0, 0.0, 0.0))
        assert np.allclose(pose.forward, [1.0, 0.0, 0.0])
        assert np.allclose(pose.up, [0.0, 0.0, 1.0])
        assert np.allclose(pose.right, [0.0, -1.0, 0.0])

    def test_straight_up_falls_back_to_x_up(self):
        pose = orientation_towards((0.0, 0.0, 0.0), (0.0, 0.0, 5.0))
        assert np.allclose(pose.forward, [0.0, 0.0, 1.0])
        assert np.allclose(pose.up, [1.0, 0.0, 0.0])

    def test_straight_down_falls_back_to_x_up(self):
        pose = orientation_towards((0.0, 0.0, 1.0), (0.0, 0.0, 0.0))
        assert np.allclose(pose.forward, [0.0, 0.0, -1.0])
        assert np.allclose(pose.up, [1.0, 0.0, 0.0])

    def test_generic_views_are_level(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            viewpoint = rng.uniform(-2.0, 2.0, 3)
            target = rng.uniform(-2.0, 2.0, 3)
            if np.allclose(viewpoint, target):
                continue
            pose = orientation_towards(viewpoint, target)
            d = target - viewpoint
            assert np.allclose(pose.forward, d / np.linalg.norm(d))
            # No roll: the right axis stays horizontal and up never points down.
            assert abs(pose.right[2]) < 1e-12
            assert pose.up[2] > 0.0

    def test_coincident_points_rejected(self):
        with pytest.raises(ValueError):
            orientation_towards((1.0, 1.0, 1.0), (1.0, 1.0, 1.0))


class TestFovDirectionGrid:
    def test_shape_and_unit_norm(self):
        dirs = fov_direction_grid(69.0, 52.0, 20, 15)
        assert dirs.shape == (15, 20, 3)
        assert np.allclose(np.linalg.norm(dirs, axis=2), 1.0)

    def test_spans_fov_between_outer_cell_edges(self):
        cols, rows = 32, 24
        fov_h, fov_v = 69.0, 52.0
        dirs = fov_direction_grid(fov_h, fov_v, cols, rows)
        sx = math.tan(math.radians(fov_h) / 2.0) / (cols / 2.0)
        corner = dirs[0, -1]
        tan_x = corner[0] / corner[2]
        # Outermost cell centers sit half a cell pitch inside the FOV edge.
        assert math.isclose(tan_x + sx / 2.0, math.tan(math.radians(fov_h) / 2.0))

    def test_image_orientation(self):
        dirs = fov_direction_grid(60.0, 45.0, 9, 7)
        assert dirs[0, 4, 1] < 0.0  # top row points up (negative camera y)
        assert dirs[-1, 4, 1] > 0.0
        assert dirs[3, 0, 0] < 0.0  # left column points left
        assert dirs[3, -1, 0] > 0.0
        center = dirs[3, 4]
        assert np.array_equal(center, [0.0, 0.0, 1.0])

    def test_mirror_symmetry(self):
        dirs = fov_direction_grid(69.0, 52.0, 16, 12)
        assert np.allclose(dirs[:, ::-1, 0], -dirs[:, :, 0])
        assert np.allclose(dirs[::-1, :, 1], -dirs[:, :, 1])

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            fov_direction_grid(0.0, 52.0, 4, 4)
        with pytest.raises(ValueError):
            fov_direction_grid(69.0, 180.0, 4, 4)
        with pytest.raises(ValueError):
            fov_direction_grid(69.0, 52.0, 0, 4)
