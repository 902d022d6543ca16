"""Camera pose math and field-of-view direction grids.

Camera frame convention: x right, y down, z forward (rotation matrix columns
in that order). The world frame is z-up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_WORLD_UP = np.array([0.0, 0.0, 1.0])
_FALLBACK_UP = np.array([1.0, 0.0, 0.0])
_ORTHO_TOL = 1e-9


@dataclass(eq=False)
class ViewPose:
    """Rigid sensor pose: position plus a right-handed rotation matrix."""

    position: np.ndarray
    rotation: np.ndarray = field(
        default_factory=lambda: np.eye(3)
    )

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if not (np.isfinite(self.position).all() and np.isfinite(self.rotation).all()):
            raise ValueError("pose must be finite")
        err = np.abs(self.rotation.T @ self.rotation - np.eye(3)).max()
        if err > _ORTHO_TOL:
            raise ValueError(f"rotation not orthonormal (error {err:.2e})")
        det = float(np.linalg.det(self.rotation))
        if abs(det - 1.0) > _ORTHO_TOL:
            raise ValueError(f"rotation must be proper (det {det})")

    @property
    def forward(self) -> np.ndarray:
        return self.rotation[:, 2]

    @property
    def right(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def up(self) -> np.ndarray:
        return -self.rotation[:, 1]

    def __repr__(self) -> str:
        p = self.position
        f = self.forward
        return (
            f"ViewPose(position=({p[0]:.3f}, {p[1]:.3f}, {p[2]:.3f}), "
            f"forward=({f[0]:.3f}, {f[1]:.3f}, {f[2]:.3f}))"
        )


def orientation_towards(viewpoint, target) -> ViewPose:
    """Pose at ``viewpoint`` looking at ``target`` with up derived from world z.

    When the view direction is parallel to world z the up axis falls back to
    world x, which fixes the roll deterministically.
    """
    viewpoint = np.asarray(viewpoint, dtype=float).reshape(3)
    target = np.asarray(target, dtype=float).reshape(3)
    d = target - viewpoint
    norm = math.sqrt(float((d * d).sum()))
    if norm == 0.0 or not math.isfinite(norm):
        raise ValueError("viewpoint and target must be distinct and finite")
    fwd = d / norm
    up = _WORLD_UP - fwd * float(fwd @ _WORLD_UP)
    if float((up * up).sum()) < 1e-18:
        up = _FALLBACK_UP - fwd * float(fwd @ _FALLBACK_UP)
    up = up / math.sqrt(float((up * up).sum()))
    right = np.cross(fwd, up)
    down = np.cross(fwd, right)
    rotation = np.stack([right, down, fwd], axis=1)
    return ViewPose(viewpoint, rotation)


def fov_direction_grid(fov_h_deg: float, fov_v_deg: float, cols: int, rows: int) -> np.ndarray:
    """Unit direction per cell of a rows x cols grid spanning the FOV.

    Cells sit at pixel-like centers on the tangent plane z = 1, so the grid is
    uniform in image space. Returns an array of shape (rows, cols, 3) in the
    camera frame.
    """
    if cols < 1 or rows < 1:
        raise ValueError("grid must have at least one row and one column")
    if not (0.0 < fov_h_deg < 180.0 and 0.0 < fov_v_deg < 180.0):
        raise ValueError("field of view must be in (0, 180) degrees")
    sx = math.tan(math.radians(fov_h_deg) / 2.0) / (cols / 2.0)
    sy = math.tan(math.radians(fov_v_deg) / 2.0) / (rows / 2.0)
    xs = (np.arange(cols) + 0.5 - cols / 2.0) * sx
    ys = (np.arange(rows) + 0.5 - rows / 2.0) * sy
    dirs = np.empty((rows, cols, 3), dtype=np.float64)
    dirs[..., 0] = xs[None, :]
    dirs[..., 1] = ys[:, None]
    dirs[..., 2] = 1.0
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    return dirs
