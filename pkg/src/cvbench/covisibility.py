"""Pairwise co-visibility labeling from depth and normal rasters.

For every pixel of the source view, its depth is lifted to 3D, mapped into
the target camera, and compared against the target view's depth raster.
Labels:

* CoVisible   - the target camera sees the same surface point
* Occluded    - the point is blocked in the target view, or its surface
                faces away from the target camera
* OutOfView   - the point lands behind the target camera or off its image
* Invalid     - no usable source depth, or the warped lookup only finds
                invalid target depths

Both warp directions of a pair are computed from the two absolute poses so
that swapping the pair's images swaps the two label maps bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import (
    CameraIntrinsics,
    RelativePose,
    RigidPose,
    backproject,
    pixel_grid,
    relative_pose,
)
from .rasters import CovisibilityMap, CovisLabel, DepthMap, NormalMap

# Slack, in pixels, for the off-image test; keeps border pixels that
# round-trip to -1e-16 from drifting out of view.
_EDGE_TOL = 1e-6


@dataclass(frozen=True)
class CovisParams:
    """Thresholds for the occlusion tests.

    tau is the relative depth-disagreement threshold; epsilon_deg is the
    slack, in degrees, of the facing test against the target camera's
    optical axis.
    """

    tau: float = 0.05
    epsilon_deg: float = 5.0

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}")
        if not 0.0 <= self.epsilon_deg < 90.0:
            raise ConfigError(f"epsilon_deg must lie in [0, 90), got {self.epsilon_deg}")


@dataclass
class WarpResult:
    """Per-pixel outcome of warping the source depth into the target view."""

    warped_depth: np.ndarray  # (H, W) predicted source-view depth, NaN unset
    target_xy: np.ndarray  # (H, W, 2) warp coordinates in the target image
    source_invalid: np.ndarray  # (H, W) bool: no usable source depth
    out_of_view: np.ndarray  # (H, W) bool: behind target camera or off-image
    lookup_invalid: np.ndarray  # (H, W) bool: in view but no valid target depth


def _bilinear_valid(depth: DepthMap, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear interpolation that renormalizes over valid corners only.

    Returns (values, ok); ok is False where all four corners are invalid.
    """
    h, w = depth.values.shape
    x = xy[:, 0]
    y = xy[:, 1]
    x0 = np.clip(np.floor(x).astype(np.int64), 0, w - 1)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0

    values = np.zeros(x.shape, dtype=np.float64)
    wsum = np.zeros(x.shape, dtype=np.float64)
    filled = np.nan_to_num(depth.values, nan=0.0)
    corners = (
        (y0, x0, (1.0 - fx) * (1.0 - fy)),
        (y0, x1, fx * (1.0 - fy)),
        (y1, x0, (1.0 - fx) * fy),
        (y1, x1, fx * fy),
    )
    for yy, xx, weight in corners:
        wv = weight * depth.valid[yy, xx]
        values += wv * filled[yy, xx]
        wsum += wv
    ok = wsum > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(ok, values / wsum, np.nan)
    return values, ok


def warp_depth(
    depth1: DepthMap,
    depth2: DepthMap,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
    rel: RelativePose,
) -> WarpResult:
    """Predict view 1's depth by looking the scene up through view 2.

    ``rel`` maps camera-2 coordinates into camera 1. Every valid source
    pixel is transported into camera 2, the target depth is sampled
    bilinearly there (skipping invalid corners), and the sampled surface
    point is carried back to camera 1 where its z becomes the prediction.
    """
    h, w = depth1.values.shape
    if (h, w) != (intr1.height, intr1.width):
        raise ConfigError(
            f"source depth is {w}x{h}, intrinsics expect {intr1.width}x{intr1.height}"
        )
    if depth2.values.shape != (intr2.height, intr2.width):
        raise ConfigError(
            f"target depth is {depth2.values.shape[1]}x{depth2.values.shape[0]}, "
            f"intrinsics expect {intr2.width}x{intr2.height}"
        )
    warped = np.full((h, w), np.nan, dtype=np.float64)
    target_xy = np.full((h, w, 2), np.nan, dtype=np.float64)
    out_of_view = np.zeros((h, w), dtype=bool)
    lookup_invalid = np.zeros((h, w), dtype=bool)
    source_invalid = ~depth1.valid

    sel = depth1.valid
    if not np.any(sel):
        return WarpResult(warped, target_xy, source_invalid, out_of_view, lookup_invalid)

    grid = pixel_grid(intr1)
    x1 = backproject(grid[sel], depth1.values[sel], intr1)
    # Into camera 2: X2 = R^T (X1 - t).
    x2 = (x1 - rel.translation) @ rel.rotation

    rows, cols = np.nonzero(sel)
    behind = x2[:, 2] <= 0.0
    out_of_view[rows[behind], cols[behind]] = True

    front = ~behind
    if not np.any(front):
        return WarpResult(warped, target_xy, source_invalid, out_of_view, lookup_invalid)

    xf = x2[front]
    uv = np.empty((xf.shape[0], 2), dtype=np.float64)
    uv[:, 0] = intr2.fx * xf[:, 0] / xf[:, 2] + intr2.cx
    uv[:, 1] = intr2.fy * xf[:, 1] / xf[:, 2] + intr2.cy
    rows_f = rows[front]
    cols_f = cols[front]
    target_xy[rows_f, cols_f] = uv

    inside = intr2.contains(uv, atol=_EDGE_TOL)
    out_of_view[rows_f[~inside], cols_f[~inside]] = True
    if not np.any(inside):
        return WarpResult(warped, target_xy, source_invalid, out_of_view, lookup_invalid)

    uv_in = uv[inside]
    np.clip(uv_in[:, 0], 0.0, intr2.width - 1.0, out=uv_in[:, 0])
    np.clip(uv_in[:, 1], 0.0, intr2.height - 1.0, out=uv_in[:, 1])
    sampled, ok = _bilinear_valid(depth2, uv_in)
    rows_i = rows_f[inside]
    cols_i = cols_f[inside]
    lookup_invalid[rows_i[~ok], cols_i[~ok]] = True

    if np.any(ok):
        uv_ok = uv_in[ok]
        ray2_x = (uv_ok[:, 0] - intr2.cx) / intr2.fx
        ray2_y = (uv_ok[:, 1] - intr2.cy) / intr2.fy
        d2 = sampled[ok]
        p2 = np.stack([ray2_x * d2, ray2_y * d2, d2], axis=-1)
        back = p2 @ rel.rotation.T + rel.translation
        warped[rows_i[ok], cols_i[ok]] = back[:, 2]

    return WarpResult(warped, target_xy, source_invalid, out_of_view, lookup_invalid)


def classify(
    depth1: DepthMap,
    normals1: NormalMap,
    warp: WarpResult,
    rel: RelativePose,
    params: CovisParams,
) -> CovisibilityMap:
    """Turn a warp result into per-pixel co-visibility labels.

    The depth test flags a pixel Occluded when the predicted and stored
    depths disagree by more than tau relative to the stored depth. The
    facing test maps the source normal into the target camera and flags the
    pixel when the normal is less than (90 - epsilon) degrees from the
    optical axis, i.e. not clearly pointing back at the target camera.
    Pixels without a valid normal skip the facing test.
    """
    h, w = depth1.values.shape
    labels = np.full((h, w), int(CovisLabel.INVALID), dtype=np.uint8)

    labels[warp.out_of_view] = int(CovisLabel.OUT_OF_VIEW)

    testable = depth1.valid & ~warp.out_of_view & ~warp.lookup_invalid
    testable &= np.isfinite(warp.warped_depth)
    if not np.any(testable):
        return CovisibilityMap(labels=labels)

    d = depth1.values[testable]
    d_hat = warp.warped_depth[testable]
    occluded = np.abs(d_hat - d) / d > params.tau

    has_normal = normals1.valid[testable]
    if np.any(has_normal):
        n1 = normals1.values[testable][has_normal]
        # Normal in the target camera frame: R^T n.
        n2 = n1 @ rel.rotation
        with np.errstate(invalid="ignore"):
            cos_axis = n2[:, 2] / np.linalg.norm(n2, axis=-1)
        angle = np.degrees(np.arccos(np.clip(cos_axis, -1.0, 1.0)))
        away = angle < 90.0 - params.epsilon_deg
        occ = occluded[has_normal] | away
        occluded[has_normal] = occ

    labels[testable] = np.where(
        occluded, int(CovisLabel.OCCLUDED), int(CovisLabel.CO_VISIBLE)
    ).astype(np.uint8)
    return CovisibilityMap(labels=labels)


def covisibility_pair(
    intr1: CameraIntrinsics,
    depth1: DepthMap,
    normals1: NormalMap,
    pose1: RigidPose,
    intr2: CameraIntrinsics,
    depth2: DepthMap,
    normals2: NormalMap,
    pose2: RigidPose,
    params: CovisParams | None = None,
) -> tuple[CovisibilityMap, CovisibilityMap]:
    """Label both directions of an image pair.

    Each direction builds its relative pose directly from the two absolute
    poses (rather than inverting the other direction's), which makes the
    result of swapping the two views exactly the swapped result.
    """
    params = params or CovisParams()
    rel12 = relative_pose(pose1, pose2)
    rel21 = relative_pose(pose2, pose1)
    warp12 = warp_depth(depth1, depth2, intr1, intr2, rel12)
    warp21 = warp_depth(depth2, depth1, intr2, intr1, rel21)
    c12 = classify(depth1, normals1, warp12, rel12, params)
    c21 = classify(depth2, normals2, warp21, rel21, params)
    return c12, c21
