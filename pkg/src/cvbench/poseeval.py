"""Relative pose from 2D-2D matches, scaled by depth, scored against truth.

The estimation chain mirrors a classical calibrated pipeline: a normalized
8-point solver inside a locally optimized RANSAC loop scored by Sampson
distance in pixels, cheirality-based disambiguation of the four essential
decompositions, and a metric scale from the source view's depth raster at
the inlier matches.

Essential matrix convention: x2^T E x1 = 0 on normalized camera rays, so
E = [t']_x R' with X2 = R' X1 + t'. Decomposition converts back to the
package's camera-2-into-camera-1 RelativePose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousDecomposition,
    ConfigError,
    CvbError,
    DegenerateGeometry,
    InsufficientMatches,
    NoModelFound,
    ScaleUnrecoverable,
)
from .geometry import CameraIntrinsics, RelativePose, rotation_angle_deg
from .rasters import DepthMap

_MIN_SAMPLE = 8
_RANK_TOL = 1e-9

ROTATION_SUCCESS_DEG = 5.0
TRANSLATION_SUCCESS_M = 2.0


@dataclass
class MatchSet:
    """Pixel correspondences between two images."""

    points1: np.ndarray  # (n, 2)
    points2: np.ndarray  # (n, 2)

    def __post_init__(self):
        p1 = np.asarray(self.points1, dtype=np.float64).reshape(-1, 2)
        p2 = np.asarray(self.points2, dtype=np.float64).reshape(-1, 2)
        if p1.shape != p2.shape:
            raise ConfigError(f"match arrays disagree: {p1.shape} vs {p2.shape}")
        self.points1 = p1
        self.points2 = p2

    def __len__(self) -> int:
        return self.points1.shape[0]


@dataclass
class EssentialResult:
    essential: np.ndarray  # (3, 3), x2^T E x1 = 0 on normalized rays
    inliers: np.ndarray  # (n,) bool
    iterations: int


@dataclass
class EvalRecord:
    pair_id: str
    success: bool
    rot_err_deg: float | None = None
    trans_err_m: float | None = None
    failure_reason: str | None = None


def _homogeneous(points: np.ndarray) -> np.ndarray:
    return np.concatenate([points, np.ones((points.shape[0], 1))], axis=1)


def _hartley_normalize(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Shift to zero centroid and scale to RMS distance sqrt(2)."""
    centroid = points.mean(axis=0)
    shifted = points - centroid
    rms = np.sqrt((shifted**2).sum(axis=1).mean())
    scale = np.sqrt(2.0) / rms if rms > 0.0 else 1.0
    transform = np.array(
        [[scale, 0.0, -scale * centroid[0]], [0.0, scale, -scale * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return shifted * scale, transform


def _constraint_matrix(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Rows of the linear system for x2^T E x1 = 0, E flattened row-major."""
    h1 = _homogeneous(x1)
    h2 = _homogeneous(x2)
    return (h2[:, :, None] * h1[:, None, :]).reshape(-1, 9)


def _solve_eight_point(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Least-squares essential matrix on normalized camera coordinates."""
    n1, t1 = _hartley_normalize(x1)
    n2, t2 = _hartley_normalize(x2)
    a = _constraint_matrix(n1, n2)
    _, _, vt = np.linalg.svd(a)
    e_hat = vt[-1].reshape(3, 3)
    e = t2.T @ e_hat @ t1
    u, _, vt_e = np.linalg.svd(e)
    return u @ np.diag([1.0, 1.0, 0.0]) @ vt_e


def _sampson_px(
    essential: np.ndarray,
    pix1: np.ndarray,
    pix2: np.ndarray,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
) -> np.ndarray:
    """First-order geometric distance to the epipolar constraint, in pixels."""
    fmat = np.linalg.inv(intr2.matrix()).T @ essential @ np.linalg.inv(intr1.matrix())
    h1 = _homogeneous(pix1)
    h2 = _homogeneous(pix2)
    f_x1 = h1 @ fmat.T  # rows F p1
    ft_x2 = h2 @ fmat  # rows F^T p2
    top = np.sum(h2 * f_x1, axis=1)
    denom = f_x1[:, 0] ** 2 + f_x1[:, 1] ** 2 + ft_x2[:, 0] ** 2 + ft_x2[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.abs(top) / np.sqrt(denom)
    return np.where(denom > 0.0, d, np.inf)


def _normalized(points: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    out = np.empty_like(points)
    out[:, 0] = (points[:, 0] - intr.cx) / intr.fx
    out[:, 1] = (points[:, 1] - intr.cy) / intr.fy
    return out


def estimate_essential(
    matches: MatchSet,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
    threshold_px: float = 0.5,
    seed: int = 0,
    max_iters: int = 1000,
    confidence: float = 0.999,
    lo_rounds: int = 10,
) -> EssentialResult:
    """LO-RANSAC essential matrix maximizing Sampson inliers.

    Raises:
        InsufficientMatches: fewer than 8 correspondences.
        NoModelFound: no hypothesis reached 8 inliers within budget.
        DegenerateGeometry: the final consensus set does not determine an
            essential matrix (zero baseline or single-plane structure leave
            the constraint system rank-deficient).
    """
    n = len(matches)
    if n < _MIN_SAMPLE:
        raise InsufficientMatches(f"essential estimation needs >= 8 matches, got {n}")
    if threshold_px <= 0.0:
        raise ConfigError("threshold_px must be positive")
    x1 = _normalized(matches.points1, intr1)
    x2 = _normalized(matches.points2, intr2)

    rng = np.random.default_rng(seed)
    best_e: np.ndarray | None = None
    best_count = 0
    needed = max_iters
    it = 0
    while it < min(needed, max_iters):
        it += 1
        pick = rng.choice(n, size=_MIN_SAMPLE, replace=False)
        e = _solve_eight_point(x1[pick], x2[pick])
        d = _sampson_px(e, matches.points1, matches.points2, intr1, intr2)
        count = int(np.count_nonzero(d <= threshold_px))
        if count <= best_count:
            continue

        for _ in range(lo_rounds):
            mask = (
                _sampson_px(e, matches.points1, matches.points2, intr1, intr2)
                <= threshold_px
            )
            if int(mask.sum()) < _MIN_SAMPLE:
                break
            refit = _solve_eight_point(x1[mask], x2[mask])
            refit_count = int(
                np.count_nonzero(
                    _sampson_px(refit, matches.points1, matches.points2, intr1, intr2)
                    <= threshold_px
                )
            )
            if refit_count > count:
                e, count = refit, refit_count
            else:
                break

        if count > best_count:
            best_e, best_count = e, count
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

    if best_e is None or best_count < _MIN_SAMPLE:
        raise NoModelFound(f"no essential matrix reached 8 inliers in {it} iterations")

    inliers = (
        _sampson_px(best_e, matches.points1, matches.points2, intr1, intr2) <= threshold_px
    )
    # The consensus set must pin the essential matrix down to one direction:
    # rank < 7 of the constraint system means a whole family fits (true for
    # zero-baseline pairs and single-plane scenes).
    n1, _ = _hartley_normalize(x1[inliers])
    n2, _ = _hartley_normalize(x2[inliers])
    sv = np.linalg.svd(_constraint_matrix(n1, n2), compute_uv=False)
    if sv[6] <= _RANK_TOL * sv[0]:
        raise DegenerateGeometry(
            "matches leave the essential matrix underdetermined "
            "(zero baseline or degenerate structure)"
        )
    return EssentialResult(essential=best_e, inliers=inliers, iterations=it)


def _triangulate_depths(
    r_prime: np.ndarray, t_prime: np.ndarray, x1: np.ndarray, x2: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-match depths (lambda1, lambda2) under X2 = R' X1 + t'.

    Solves the two-ray system lambda2 x2 = R' (lambda1 x1) + t' in least
    squares. Matches with (near-)parallel rays get NaN depths.
    """
    h1 = _homogeneous(x1)
    h2 = _homogeneous(x2)
    a = h1 @ r_prime.T
    b = -h2
    aa = np.sum(a * a, axis=1)
    bb = np.sum(b * b, axis=1)
    ab = np.sum(a * b, axis=1)
    at = a @ t_prime
    bt = b @ t_prime
    det = aa * bb - ab * ab
    with np.errstate(divide="ignore", invalid="ignore"):
        lam1 = (-at * bb + ab * bt) / det
        lam2 = (-bt * aa + ab * at) / det
    bad = det <= 0.0
    lam1 = np.where(bad, np.nan, lam1)
    lam2 = np.where(bad, np.nan, lam2)
    return lam1, lam2


def decompose_essential(
    result: EssentialResult,
    matches: MatchSet,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
) -> RelativePose:
    """Pick the decomposition whose triangulations lie in front of both cameras.

    Returns the camera-2-into-camera-1 relative pose with unit translation.
    Raises AmbiguousDecomposition when cheirality cannot separate the four
    candidates (tie in positive-depth counts, or no candidate gets any).
    """
    u, _, vt = np.linalg.svd(result.essential)
    if np.linalg.det(u) < 0.0:
        u = -u
    if np.linalg.det(vt) < 0.0:
        vt = -vt
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    rot_a = u @ w @ vt
    rot_b = u @ w.T @ vt
    t_unit = u[:, 2]

    x1 = _normalized(matches.points1[result.inliers], intr1)
    x2 = _normalized(matches.points2[result.inliers], intr2)

    counts = []
    candidates = []
    for r_prime in (rot_a, rot_b):
        for t_prime in (t_unit, -t_unit):
            lam1, lam2 = _triangulate_depths(r_prime, t_prime, x1, x2)
            good = np.nan_to_num(lam1, nan=-1.0) > 0.0
            good &= np.nan_to_num(lam2, nan=-1.0) > 0.0
            counts.append(int(np.count_nonzero(good)))
            candidates.append((r_prime, t_prime))

    best = max(counts)
    if best == 0 or counts.count(best) > 1:
        raise AmbiguousDecomposition(
            f"cheirality counts {counts} do not single out a pose"
        )
    r_prime, t_prime = candidates[counts.index(best)]
    # X2 = R' X1 + t'  ->  X1 = R'^T X2 - R'^T t'.
    return RelativePose(rotation=r_prime.T, translation=-(r_prime.T @ t_prime))


def recover_scale(
    pose_unit: RelativePose,
    matches: MatchSet,
    inliers: np.ndarray,
    depth1: DepthMap,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
) -> float:
    """Metric scale for a unit-baseline pose from view 1's depth raster.

    Triangulates each inlier under the unit-translation pose and takes the
    median of measured-over-triangulated depth in camera 1. Matches without
    a positive triangulation or without a valid depth at their (rounded)
    view-1 pixel are skipped.

    Raises ScaleUnrecoverable when no usable inlier remains or the median
    is not positive and finite.
    """
    mask = np.asarray(inliers, dtype=bool)
    p1 = matches.points1[mask]
    p2 = matches.points2[mask]
    if p1.shape[0] == 0:
        raise ScaleUnrecoverable("no inlier matches to recover scale from")
    inv = pose_unit.inverse()
    lam1, lam2 = _triangulate_depths(
        inv.rotation, inv.translation, _normalized(p1, intr1), _normalized(p2, intr2)
    )
    cols = np.clip(np.rint(p1[:, 0]).astype(np.int64), 0, depth1.width - 1)
    rows = np.clip(np.rint(p1[:, 1]).astype(np.int64), 0, depth1.height - 1)
    has_depth = depth1.valid[rows, cols]
    usable = (
        has_depth
        & (np.nan_to_num(lam1, nan=-1.0) > 0.0)
        & (np.nan_to_num(lam2, nan=-1.0) > 0.0)
    )
    if not np.any(usable):
        raise ScaleUnrecoverable("no inlier has both a triangulation and a valid depth")
    ratios = depth1.values[rows[usable], cols[usable]] / lam1[usable]
    scale = float(np.median(ratios))
    if not np.isfinite(scale) or scale <= 0.0:
        raise ScaleUnrecoverable(f"scale median {scale:.3g} is unusable")
    return scale


def judge(rot_err_deg: float, trans_err_m: float) -> bool:
    """Success iff rotation error < 5 degrees and translation error < 2 m."""
    return rot_err_deg < ROTATION_SUCCESS_DEG and trans_err_m < TRANSLATION_SUCCESS_M


def pose_errors(estimate: RelativePose, truth: RelativePose) -> tuple[float, float]:
    """(geodesic rotation error in degrees, translation error in meters)."""
    rot = rotation_angle_deg(estimate.rotation @ truth.rotation.T)
    trans = float(np.linalg.norm(estimate.translation - truth.translation))
    return rot, trans


def translation_direction_error_deg(
    estimate: RelativePose, truth: RelativePose
) -> float:
    """Angle between translation directions, for diagnostics on unit poses."""
    a = estimate.translation
    b = truth.translation
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ConfigError("direction error undefined for zero translations")
    cosang = float(np.dot(a, b) / (na * nb))
    return float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))


def evaluate_pair(
    pair_id: str,
    matches: MatchSet,
    intr1: CameraIntrinsics,
    intr2: CameraIntrinsics,
    depth1: DepthMap,
    truth: RelativePose,
    threshold_px: float = 0.5,
    seed: int = 0,
) -> EvalRecord:
    """Run the full chain on one pair; failures become failed records."""
    try:
        est = estimate_essential(matches, intr1, intr2, threshold_px=threshold_px, seed=seed)
        pose = decompose_essential(est, matches, intr1, intr2)
        scale = recover_scale(pose, matches, est.inliers, depth1, intr1, intr2)
        metric = RelativePose(rotation=pose.rotation, translation=pose.translation * scale)
    except CvbError as exc:
        return EvalRecord(pair_id=pair_id, success=False, failure_reason=type(exc).__name__)
    rot_err, trans_err = pose_errors(metric, truth)
    return EvalRecord(
        pair_id=pair_id,
        success=judge(rot_err, trans_err),
        rot_err_deg=rot_err,
        trans_err_m=trans_err,
    )
