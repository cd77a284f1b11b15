"""Pinhole camera model and rigid / relative pose types.

Conventions used throughout the package:

* Camera frame: x right, y down, z along the optical axis (forward).
* Depth is the z coordinate in the camera frame, not the ray length.
* Pixel coordinates address pixel centers; (0, 0) is the center of the
  top-left pixel, and a W x H image spans [0, W-1] x [0, H-1].
* A pose stores the world-from-camera transform: ``rotation`` maps
  camera-frame vectors into the world frame and ``translation`` is the
  camera center expressed in world coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, ConfigError, DomainError

_ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with zero skew."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"image size must be positive, got {self.width}x{self.height}")

    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )

    def inverse_matrix(self) -> np.ndarray:
        """Closed-form inverse of K."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ],
            dtype=np.float64,
        )

    def contains(self, pixels: np.ndarray, atol: float = 0.0) -> np.ndarray:
        """True for pixel coordinates inside [0, W-1] x [0, H-1].

        ``atol`` widens the test by that many pixels: round-tripping a
        border pixel through a warp can land a hair outside the domain,
        and callers that clamp afterwards should not lose it.
        """
        p = np.asarray(pixels, dtype=np.float64)
        x, y = p[..., 0], p[..., 1]
        return (
            (x >= -atol)
            & (x <= self.width - 1.0 + atol)
            & (y >= -atol)
            & (y <= self.height - 1.0 + atol)
        )


def _check_rotation(rotation: np.ndarray) -> np.ndarray:
    r = np.asarray(rotation, dtype=np.float64)
    if r.shape != (3, 3):
        raise ConfigError(f"rotation must be 3x3, got {r.shape}")
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err > _ORTHONORMAL_TOL:
        raise ConfigError(f"rotation is not orthonormal (max deviation {err:.3e})")
    if np.linalg.det(r) < 0.0:
        raise ConfigError("rotation has negative determinant (reflection)")
    return r


@dataclass(frozen=True)
class RigidPose:
    """World-from-camera rigid transform; ``translation`` is the camera center."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "translation", t)

    def camera_from_world(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return (pts - self.translation) @ self.rotation

    def world_from_camera(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation


@dataclass(frozen=True)
class RelativePose:
    """Camera-2-from-... map into camera 1: X1 = rotation @ X2 + translation.

    ``translation`` is camera 2's center expressed in camera 1's frame, so a
    zero vector means the two cameras share a center.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "translation", t)

    def inverse(self) -> "RelativePose":
        rt = self.rotation.T
        return RelativePose(rotation=rt, translation=-(rt @ self.translation))

    def transform(self, points_cam2: np.ndarray) -> np.ndarray:
        pts = np.asarray(points_cam2, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.translation))


def relative_pose(pose1: RigidPose, pose2: RigidPose) -> RelativePose:
    """Relative transform taking camera-2 coordinates into camera 1."""
    r12 = pose1.rotation.T @ pose2.rotation
    t12 = pose1.rotation.T @ (pose2.translation - pose1.translation)
    return RelativePose(rotation=r12, translation=t12)


def backproject(pixels: np.ndarray, depths: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Lift pixels with z-depths to camera-frame 3D points.

    Args:
        pixels: (..., 2) pixel coordinates.
        depths: (...,) z-depths in meters; must be positive and finite.
        intr: camera intrinsics.

    Returns:
        (..., 3) points; the z coordinate of each equals its input depth.
    """
    p = np.asarray(pixels, dtype=np.float64)
    d = np.asarray(depths, dtype=np.float64)
    if p.shape[:-1] != d.shape:
        raise ConfigError(f"pixels {p.shape} and depths {d.shape} do not broadcast")
    if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
        raise DomainError("depths must be finite and positive")
    x = (p[..., 0] - intr.cx) / intr.fx
    y = (p[..., 1] - intr.cy) / intr.fy
    return np.stack([x * d, y * d, d], axis=-1)


def project(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Project camera-frame points to pixel coordinates.

    Raises BehindCamera if any point has z <= 0. No bounds check is done;
    callers decide what off-image coordinates mean.
    """
    pts = np.asarray(points, dtype=np.float64)
    z = pts[..., 2]
    if np.any(z <= 0.0) or not np.all(np.isfinite(z)):
        raise BehindCamera("cannot project points with non-positive depth")
    u = intr.fx * pts[..., 0] / z + intr.cx
    v = intr.fy * pts[..., 1] / z + intr.cy
    return np.stack([u, v], axis=-1)


def rays(pixels: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    """Unnormalized viewing rays K^-1 p with z component 1."""
    p = np.asarray(pixels, dtype=np.float64)
    x = (p[..., 0] - intr.cx) / intr.fx
    y = (p[..., 1] - intr.cy) / intr.fy
    return np.stack([x, y, np.ones_like(x)], axis=-1)


def pixel_grid(intr: CameraIntrinsics) -> np.ndarray:
    """(H, W, 2) array of pixel-center coordinates."""
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv], axis=-1)


def angle_between_deg(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Angle between vectors along the last axis, in degrees, clamped safely."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(av, axis=-1)
    nb = np.linalg.norm(bv, axis=-1)
    denom = na * nb
    if np.any(denom == 0.0):
        raise DomainError("angle undefined for zero-length vectors")
    cosang = np.sum(av * bv, axis=-1) / denom
    return np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))


def quat_to_rotation(q_wxyz: np.ndarray) -> np.ndarray:
    """Rotation matrix from a unit quaternion in (w, x, y, z) order."""
    q = np.asarray(q_wxyz, dtype=np.float64).reshape(4)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise DomainError("zero quaternion")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def rotation_to_quat(rotation: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a rotation matrix, with w >= 0."""
    r = _check_rotation(rotation)
    # Shepperd's method: pick the largest diagonal combination for stability.
    tr = np.trace(r)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] >= r[2, 2]:
        s = np.sqrt(1.0 - r[0, 0] + r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 - r[0, 0] - r[1, 1] + r[2, 2]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
        )
    q = q / np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    return q


def rotation_angle_deg(rotation: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix in degrees."""
    r = np.asarray(rotation, dtype=np.float64)
    cosang = (np.trace(r) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
