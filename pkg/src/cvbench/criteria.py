"""Pair difficulty criteria: overlap, scale ratio, viewpoint angle.

All three are built from the co-visibility label maps of a pair:

* overlap: co-visible pixels of both directions over total pixels.
* scale ratio: per co-visible pixel, the surface point's distance to each
  camera center; the ratio of the larger over the smaller, median over both
  directions. 1 means equal apparent scale, 2 means one view sees the
  surface at twice the sampling density of the other.
* viewpoint angle: per co-visible pixel, the angle in degrees between the
  two sight lines to the surface point, median over both directions.

Medians use the lower median (no averaging) so reported values are always
actually attained by some pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCovisibility
from .geometry import (
    CameraIntrinsics,
    RelativePose,
    RigidPose,
    backproject,
    pixel_grid,
    relative_pose,
)
from .rasters import CovisibilityMap, CovisLabel, DepthMap, NormalMap
from .covisibility import CovisParams, covisibility_pair


@dataclass(frozen=True)
class PairCriteria:
    omega: float
    delta: float
    theta_deg: float
    covis_pixels_ab: int
    covis_pixels_ba: int


def lower_median(values: np.ndarray) -> float:
    """Median that returns the lower of the two middle order statistics."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise EmptyCovisibility("median of an empty sample is undefined")
    return float(v[(v.size - 1) // 2])


def overlap(covis_ab: CovisibilityMap, covis_ba: CovisibilityMap) -> float:
    """Fraction of all pixels of both images that are co-visible."""
    total = covis_ab.labels.size + covis_ba.labels.size
    co = covis_ab.count(CovisLabel.CO_VISIBLE) + covis_ba.count(CovisLabel.CO_VISIBLE)
    return co / total


def _direction_samples(
    depth: DepthMap,
    covis: CovisibilityMap,
    intr: CameraIntrinsics,
    other_center: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (ratio, angle_deg) samples for one direction of a pair.

    ``other_center`` is the other camera's center expressed in this
    camera's frame. Pixels whose surface point coincides with either camera
    center are skipped; both sight lines must have a direction.
    """
    sel = (covis.labels == int(CovisLabel.CO_VISIBLE)) & depth.valid
    if not np.any(sel):
        return np.empty(0), np.empty(0)
    grid = pixel_grid(intr)
    points = backproject(grid[sel], depth.values[sel], intr)
    to_other = points - other_center
    d_self = np.linalg.norm(points, axis=-1)
    d_other = np.linalg.norm(to_other, axis=-1)
    usable = (d_self > 0.0) & (d_other > 0.0)
    points = points[usable]
    to_other = to_other[usable]
    d_self = d_self[usable]
    d_other = d_other[usable]

    ratio = np.maximum(d_self / d_other, d_other / d_self)
    cosang = np.sum(points * to_other, axis=-1) / (d_self * d_other)
    angle = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return ratio, angle


def scale_ratio(
    depth1: DepthMap,
    depth2: DepthMap,
    covis_ab: CovisibilityMap,
    covis_ba: CovisibilityMap,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
    rel: RelativePose,
) -> float:
    """Median relative apparent-scale factor over both directions (>= 1)."""
    r_ab, _ = _direction_samples(depth1, covis_ab, intr1, rel.translation)
    r_ba, _ = _direction_samples(depth2, covis_ba, intr2, rel.inverse().translation)
    return lower_median(np.concatenate([r_ab, r_ba]))


def viewpoint_angle(
    depth1: DepthMap,
    depth2: DepthMap,
    covis_ab: CovisibilityMap,
    covis_ba: CovisibilityMap,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
    rel: RelativePose,
) -> float:
    """Median sight-line angle in degrees over both directions."""
    _, a_ab = _direction_samples(depth1, covis_ab, intr1, rel.translation)
    _, a_ba = _direction_samples(depth2, covis_ba, intr2, rel.inverse().translation)
    return lower_median(np.concatenate([a_ab, a_ba]))


def compute_criteria(
    intr1: CameraIntrinsics,
    depth1: DepthMap,
    normals1: NormalMap,
    pose1: RigidPose,
    intr2: CameraIntrinsics,
    depth2: DepthMap,
    normals2: NormalMap,
    pose2: RigidPose,
    params: CovisParams | None = None,
) -> PairCriteria:
    """Label the pair and reduce it to its three difficulty criteria.

    Raises EmptyCovisibility when no pixel of either direction is
    co-visible; the criteria are undefined for such pairs.
    """
    covis_ab, covis_ba = covisibility_pair(
        intr1, depth1, normals1, pose1, intr2, depth2, normals2, pose2, params
    )
    return criteria_from_maps(
        intr1, depth1, pose1, intr2, depth2, pose2, covis_ab, covis_ba
    )


def criteria_from_maps(
    intr1: CameraIntrinsics,
    depth1: DepthMap,
    pose1: RigidPose,
    intr2: CameraIntrinsics,
    depth2: DepthMap,
    pose2: RigidPose,
    covis_ab: CovisibilityMap,
    covis_ba: CovisibilityMap,
) -> PairCriteria:
    """Criteria from precomputed label maps (the staged-pipeline entry).

    Each direction derives its own relative pose from the absolute poses,
    which keeps compute_criteria(A, B) and compute_criteria(B, A) exactly
    equal up to the swap.
    """
    t_ab = relative_pose(pose1, pose2).translation
    t_ba = relative_pose(pose2, pose1).translation
    r_ab, ang_ab = _direction_samples(depth1, covis_ab, intr1, t_ab)
    r_ba, ang_ba = _direction_samples(depth2, covis_ba, intr2, t_ba)
    ratios = np.concatenate([r_ab, r_ba])
    if ratios.size == 0:
        raise EmptyCovisibility("pair has no co-visible pixels")
    angles = np.concatenate([ang_ab, ang_ba])
    return PairCriteria(
        omega=overlap(covis_ab, covis_ba),
        delta=lower_median(ratios),
        theta_deg=lower_median(angles),
        covis_pixels_ab=covis_ab.count(CovisLabel.CO_VISIBLE),
        covis_pixels_ba=covis_ba.count(CovisLabel.CO_VISIBLE),
    )
