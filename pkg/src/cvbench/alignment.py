"""Metric alignment of an up-to-scale trajectory onto ground truth.

A closed-form similarity fit over matched 3D positions, wrapped in a
locally optimized RANSAC loop. Residuals are measured after projecting to
the ground plane (xy), since vertical drift in reconstructed trajectories
tends to be correlated and would otherwise dominate the inlier test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DegenerateConfiguration,
    InsufficientData,
    NoModelFound,
)
from .geometry import RigidPose

_MIN_SAMPLE = 3
_RANK_TOL = 1e-9


@dataclass(frozen=True)
class Sim3:
    """Similarity transform y = scale * rotation @ x + translation."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * (pts @ self.rotation.T) + self.translation


@dataclass
class AlignmentResult:
    model: Sim3
    inliers: np.ndarray  # (n,) bool
    residuals: np.ndarray  # (n,) ground-plane distances under the model
    iterations: int


def umeyama_sim3(src: np.ndarray, dst: np.ndarray) -> Sim3:
    """Least-squares similarity aligning src onto dst.

    Raises:
        InsufficientData: fewer than 3 point pairs.
        DegenerateConfiguration: points do not determine the transform
            (collinear or coincident configurations).
    """
    s_pts = np.asarray(src, dtype=np.float64)
    d_pts = np.asarray(dst, dtype=np.float64)
    if s_pts.shape != d_pts.shape or s_pts.ndim != 2 or s_pts.shape[1] != 3:
        raise ConfigError(f"expected matching (n, 3) arrays, got {s_pts.shape} / {d_pts.shape}")
    n = s_pts.shape[0]
    if n < _MIN_SAMPLE:
        raise InsufficientData(f"similarity fit needs >= {_MIN_SAMPLE} points, got {n}")

    mu_s = s_pts.mean(axis=0)
    mu_d = d_pts.mean(axis=0)
    xs = s_pts - mu_s
    xd = d_pts - mu_d

    cov = xd.T @ xs / n
    u, d, vt = np.linalg.svd(cov)
    # Rank < 2 leaves a rotation about the common axis unconstrained.
    if d[1] <= _RANK_TOL * d[0] or d[0] == 0.0:
        raise DegenerateConfiguration("points are collinear or coincident")

    sign = np.sign(np.linalg.det(u) * np.linalg.det(vt))
    if sign == 0.0:
        raise DegenerateConfiguration("singular covariance in similarity fit")
    s_diag = np.array([1.0, 1.0, sign])
    rotation = u @ np.diag(s_diag) @ vt

    var_s = float((xs * xs).sum() / n)
    if var_s == 0.0:
        raise DegenerateConfiguration("source points are coincident")
    scale = float((d * s_diag).sum() / var_s)
    if scale <= 0.0:
        raise DegenerateConfiguration(f"fit produced non-positive scale {scale:.3g}")
    translation = mu_d - scale * (rotation @ mu_s)
    return Sim3(scale=scale, rotation=rotation, translation=translation)


def ground_plane_residuals(model: Sim3, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Distances between mapped src and dst after dropping the z component."""
    diff = model.apply(src)[:, :2] - np.asarray(dst, dtype=np.float64)[:, :2]
    return np.linalg.norm(diff, axis=-1)


def lo_ransac_align(
    src: np.ndarray,
    dst: np.ndarray,
    threshold: float = 1.0,
    seed: int = 0,
    max_iters: int = 5000,
    confidence: float = 0.999,
    lo_rounds: int = 10,
) -> AlignmentResult:
    """Robust similarity alignment with local optimization.

    Minimal samples of 3 seed closed-form fits; every new best hypothesis
    is polished by refitting on its inliers until the inlier count stops
    growing (at most lo_rounds refits). Iteration count adapts to the best
    inlier ratio under the requested confidence, capped at max_iters. With
    a fixed seed the result is fully reproducible; among equally good
    models the earliest hypothesis wins.
    """
    s_pts = np.asarray(src, dtype=np.float64)
    d_pts = np.asarray(dst, dtype=np.float64)
    if s_pts.shape != d_pts.shape or s_pts.ndim != 2 or s_pts.shape[1] != 3:
        raise ConfigError(f"expected matching (n, 3) arrays, got {s_pts.shape} / {d_pts.shape}")
    n = s_pts.shape[0]
    if n < _MIN_SAMPLE:
        raise InsufficientData(f"alignment needs >= {_MIN_SAMPLE} pose pairs, got {n}")
    if threshold <= 0.0:
        raise ConfigError("threshold must be positive")

    rng = np.random.default_rng(seed)
    best_model: Sim3 | None = None
    best_count = 0
    needed = max_iters
    it = 0
    while it < min(needed, max_iters):
        it += 1
        pick = rng.choice(n, size=_MIN_SAMPLE, replace=False)
        try:
            model = umeyama_sim3(s_pts[pick], d_pts[pick])
        except DegenerateConfiguration:
            continue
        count = int(np.count_nonzero(ground_plane_residuals(model, s_pts, d_pts) < threshold))
        if count <= best_count:
            continue

        # Local optimization: refit on the consensus set while it grows.
        for _ in range(lo_rounds):
            mask = ground_plane_residuals(model, s_pts, d_pts) < threshold
            if int(mask.sum()) < _MIN_SAMPLE:
                break
            try:
                refit = umeyama_sim3(s_pts[mask], d_pts[mask])
            except DegenerateConfiguration:
                break
            refit_count = int(
                np.count_nonzero(ground_plane_residuals(refit, s_pts, d_pts) < threshold)
            )
            if refit_count > count:
                model, count = refit, refit_count
            else:
                break

        if count > best_count:
            best_model, best_count = model, count
            ratio = best_count / n
            if ratio >= 1.0:
                needed = it
            else:
                denom = np.log1p(-(ratio**_MIN_SAMPLE))
                needed = (
                    max_iters
                    if denom == 0.0
                    else int(np.ceil(np.log(1.0 - confidence) / denom))
                )

    if best_model is None or best_count < _MIN_SAMPLE:
        raise NoModelFound(f"no model reached {_MIN_SAMPLE} inliers in {it} iterations")

    residuals = ground_plane_residuals(best_model, s_pts, d_pts)
    return AlignmentResult(
        model=best_model,
        inliers=residuals < threshold,
        residuals=residuals,
        iterations=it,
    )


def apply_and_filter(
    poses: list[RigidPose], model: Sim3, inliers: np.ndarray
) -> list[RigidPose]:
    """Map inlier poses through the similarity, dropping outliers.

    Camera centers are transformed by the full similarity; orientations are
    rotated only, so the returned rotations stay orthonormal.
    """
    mask = np.asarray(inliers, dtype=bool)
    if mask.shape != (len(poses),):
        raise ConfigError(f"inlier mask shape {mask.shape} does not match {len(poses)} poses")
    out = []
    for keep, pose in zip(mask, poses):
        if not keep:
            continue
        center = model.apply(pose.translation[None, :])[0]
        out.append(RigidPose(rotation=model.rotation @ pose.rotation, translation=center))
    return out
