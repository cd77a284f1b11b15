"""Analytic scenes: exact rendering and a ray-cast co-visibility oracle.

Scenes are lists of analytic primitives (infinite planes, spheres,
axis-aligned boxes). Rendering intersects per-pixel rays in closed form, so
depths are exact to float64 round-off and normals come from the surface
equations rather than from finite differences. The oracle classifier
re-casts rays from the second camera instead of warping depth rasters,
which keeps it independent of the raster pipeline it is used to check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import CameraIntrinsics, RigidPose, pixel_grid, project, rays
from .rasters import CovisibilityMap, CovisLabel, DepthMap, NormalMap

_EPS_T = 1e-9
OCCLUSION_TOL = 1e-6  # meters; a blocker must be nearer than this to count


@dataclass(frozen=True)
class Plane:
    """Infinite plane through ``point`` with unit ``normal``."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.point, dtype=np.float64).reshape(3)
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise ConfigError("plane normal must be non-zero")
        object.__setattr__(self, "point", p)
        object.__setattr__(self, "normal", n / norm)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        denom = dirs @ self.normal
        offset = (self.point - origins) @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = offset / denom
        t = np.where((np.abs(denom) > 0.0) & (t > _EPS_T), t, np.inf)
        return t

    def normal_at(self, points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.normal, points.shape).copy()


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ConfigError("sphere radius must be positive")
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        object.__setattr__(self, "center", c)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        rel = origins - self.center
        a = np.sum(dirs * dirs, axis=-1)
        b = 2.0 * np.sum(dirs * rel, axis=-1)
        c = np.sum(rel * rel, axis=-1) - self.radius**2
        disc = b * b - 4.0 * a * c
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t_near = (-b - sq) / (2.0 * a)
            t_far = (-b + sq) / (2.0 * a)
        t = np.where(t_near > _EPS_T, t_near, t_far)
        return np.where(ok & (t > _EPS_T), t, np.inf)

    def normal_at(self, points: np.ndarray) -> np.ndarray:
        return (points - self.center) / self.radius


@dataclass(frozen=True)
class Box:
    """Axis-aligned box spanning [lo, hi] per axis."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if np.any(hi <= lo):
            raise ConfigError("box must have hi > lo on every axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = (self.lo - origins) / dirs
            t1 = (self.hi - origins) / dirs
        # Rays parallel to a slab: inside -> (-inf, inf), outside -> empty.
        lo_ok = origins >= self.lo
        hi_ok = origins <= self.hi
        inside = lo_ok & hi_ok
        t0 = np.where(dirs == 0.0, np.where(inside, -np.inf, np.inf), t0)
        t1 = np.where(dirs == 0.0, np.where(inside, np.inf, -np.inf), t1)
        enter = np.minimum(t0, t1)
        exit_ = np.maximum(t0, t1)
        tmin = enter.max(axis=-1)
        tmax = exit_.min(axis=-1)
        t = np.where(tmin > _EPS_T, tmin, tmax)
        hit = (tmax >= tmin) & (t > _EPS_T) & np.isfinite(t)
        return np.where(hit, t, np.inf)

    def normal_at(self, points: np.ndarray) -> np.ndarray:
        # Outward normal of the nearest face.
        d_lo = np.abs(points - self.lo)
        d_hi = np.abs(points - self.hi)
        nearest = np.minimum(d_lo, d_hi)
        axis = np.argmin(nearest, axis=-1)
        sign = np.where(
            np.take_along_axis(d_lo, axis[..., None], axis=-1)[..., 0]
            <= np.take_along_axis(d_hi, axis[..., None], axis=-1)[..., 0],
            -1.0,
            1.0,
        )
        out = np.zeros_like(points)
        np.put_along_axis(out, axis[..., None], sign[..., None], axis=-1)
        return out


@dataclass(frozen=True)
class Scene:
    primitives: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if not self.primitives:
            raise ConfigError("scene needs at least one primitive")

    def cast(self, origins: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest intersection parameter and primitive index (-1 on miss)."""
        best_t = np.full(origins.shape[:-1], np.inf)
        best_idx = np.full(origins.shape[:-1], -1, dtype=np.int64)
        for idx, prim in enumerate(self.primitives):
            t = prim.intersect(origins, dirs)
            closer = t < best_t
            best_t = np.where(closer, t, best_t)
            best_idx = np.where(closer, idx, best_idx)
        return best_t, best_idx

    def normals_at(self, points: np.ndarray, prim_idx: np.ndarray) -> np.ndarray:
        out = np.zeros_like(points)
        for idx, prim in enumerate(self.primitives):
            sel = prim_idx == idx
            if np.any(sel):
                out[sel] = prim.normal_at(points[sel])
        return out


def render(
    scene: Scene, intr: CameraIntrinsics, pose: RigidPose
) -> tuple[DepthMap, NormalMap]:
    """Exact z-depth and camera-facing normal rasters for one view.

    Rays are parametrized with unit z in the camera frame, so the
    intersection parameter is the z-depth directly. Pixels whose ray misses
    every primitive are invalid in both rasters.
    """
    grid = pixel_grid(intr)
    dirs_cam = rays(grid, intr)
    dirs_world = dirs_cam @ pose.rotation.T
    origins = np.broadcast_to(pose.translation, dirs_world.shape)

    t, prim_idx = scene.cast(origins, dirs_world)
    hit = np.isfinite(t)

    depth_values = np.where(hit, t, np.nan)

    points_world = origins + np.where(hit, t, 0.0)[..., None] * dirs_world
    normals_world = np.zeros_like(points_world)
    normals_world[hit] = scene.normals_at(points_world[hit], prim_idx[hit])
    normals_cam = normals_world @ pose.rotation

    facing = np.sum(normals_cam * dirs_cam, axis=-1)
    normals_cam = np.where((facing > 0.0)[..., None], -normals_cam, normals_cam)
    normal_values = np.where((hit & (facing != 0.0))[..., None], normals_cam, np.nan)

    return DepthMap.from_array(depth_values), NormalMap.from_array(normal_values)


def _cast_hit_points(
    scene: Scene, intr: CameraIntrinsics, pose: RigidPose
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World-frame hit points, their oriented normals, and the hit mask."""
    grid = pixel_grid(intr)
    dirs_cam = rays(grid, intr)
    dirs_world = dirs_cam @ pose.rotation.T
    origins = np.broadcast_to(pose.translation, dirs_world.shape)
    t, prim_idx = scene.cast(origins, dirs_world)
    hit = np.isfinite(t)
    points = origins + np.where(hit, t, 0.0)[..., None] * dirs_world
    normals = np.zeros_like(points)
    normals[hit] = scene.normals_at(points[hit], prim_idx[hit])
    # Orient toward the camera that sees the point.
    toward = np.sum(normals * (origins - points), axis=-1)
    normals = np.where((toward < 0.0)[..., None], -normals, normals)
    return points, normals, hit


def oracle_covis(
    scene: Scene,
    intr1: CameraIntrinsics,
    pose1: RigidPose,
    intr2: CameraIntrinsics,
    pose2: RigidPose,
) -> CovisibilityMap:
    """Ground-truth labels for view 1 against view 2 by exact ray casting.

    A hit point is Occluded for camera 2 when a strictly nearer surface
    blocks it (beyond a 1e-6 m tolerance) or when camera 2 is on the back
    side of the local surface; OutOfView when it lies behind camera 2 or
    projects off its image; Invalid when view 1's own ray misses the scene.
    """
    points, normals, hit = _cast_hit_points(scene, intr1, pose1)
    h, w = hit.shape
    labels = np.full((h, w), int(CovisLabel.INVALID), dtype=np.uint8)
    if not np.any(hit):
        return CovisibilityMap(labels=labels)

    pts = points[hit]
    nrm = normals[hit]
    flat = np.full(pts.shape[0], int(CovisLabel.OUT_OF_VIEW), dtype=np.uint8)

    in_cam2 = (pts - pose2.translation) @ pose2.rotation
    front = in_cam2[:, 2] > 0.0
    if np.any(front):
        pix2 = project(in_cam2[front], intr2)
        in_bounds = intr2.contains(pix2, atol=1e-6)

        visible_idx = np.flatnonzero(front)[in_bounds]
        if visible_idx.size:
            target = pts[visible_idx]
            to_target = target - pose2.translation
            dist = np.linalg.norm(to_target, axis=-1)
            dirs = to_target / dist[:, None]
            origins = np.broadcast_to(pose2.translation, dirs.shape)
            t_hit, _ = scene.cast(origins, dirs)
            blocked = t_hit < dist - OCCLUSION_TOL
            backfacing = np.sum(nrm[visible_idx] * -to_target, axis=-1) <= 0.0
            flat[visible_idx] = np.where(
                blocked | backfacing,
                int(CovisLabel.OCCLUDED),
                int(CovisLabel.CO_VISIBLE),
            )

    labels[hit] = flat
    return CovisibilityMap(labels=labels)


def oracle_matches(
    scene: Scene,
    intr1: CameraIntrinsics,
    pose1: RigidPose,
    intr2: CameraIntrinsics,
    pose2: RigidPose,
    count: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact correspondences at co-visible pixels of view 1.

    Returns (points1, points2) pixel arrays of shape (n, 2) with n <= count;
    n is the number of co-visible pixels when fewer exist. points1 are
    integer pixel centers, points2 the exact sub-pixel projections.
    """
    points, _, _ = _cast_hit_points(scene, intr1, pose1)
    labels = oracle_covis(scene, intr1, pose1, intr2, pose2).labels
    candidates = np.argwhere(labels == int(CovisLabel.CO_VISIBLE))
    if candidates.shape[0] == 0:
        return np.empty((0, 2)), np.empty((0, 2))
    rng = np.random.default_rng(seed)
    take = min(count, candidates.shape[0])
    sel = rng.choice(candidates.shape[0], size=take, replace=False)
    rows = candidates[sel, 0]
    cols = candidates[sel, 1]
    pts_world = points[rows, cols]
    p1 = np.stack([cols, rows], axis=-1).astype(np.float64)
    in_cam2 = (pts_world - pose2.translation) @ pose2.rotation
    p2 = project(in_cam2, intr2)
    return p1, p2
