"""Operations on depth rasters: normal estimation and affine alignment.

Normals are estimated by fitting a plane to the back-projected points in a
square window around each pixel and taking the eigenvector of the smallest
covariance eigenvalue. Windows are clipped at image borders and invalid
pixels are skipped, so border pixels still get a normal when enough valid
neighbors remain.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DegenerateFit, InsufficientData
from .geometry import CameraIntrinsics, backproject, pixel_grid, rays
from .rasters import DepthMap, NormalMap

_MIN_NEIGHBORS = 4
_RELATIVE_RANK_TOL = 1e-10
_TUKEY_C = 4.685 * 1.4826  # Tukey constant on a median-absolute-residual scale


def _box_sum(arr: np.ndarray, half: int) -> np.ndarray:
    """Sum of ``arr`` over a (2*half+1)^2 window clipped at the borders."""
    h, w = arr.shape
    integral = np.zeros((h + 1, w + 1), dtype=np.float64)
    np.cumsum(np.cumsum(arr, axis=0), axis=1, out=integral[1:, 1:])
    rows = np.arange(h)
    cols = np.arange(w)
    r0 = np.maximum(rows - half, 0)
    r1 = np.minimum(rows + half, h - 1) + 1
    c0 = np.maximum(cols - half, 0)
    c1 = np.minimum(cols + half, w - 1) + 1
    return (
        integral[np.ix_(r1, c1)]
        - integral[np.ix_(r0, c1)]
        - integral[np.ix_(r1, c0)]
        + integral[np.ix_(r0, c0)]
    )


def normals_from_depth(
    depth: DepthMap, intr: CameraIntrinsics, window: int = 5
) -> NormalMap:
    """Per-pixel camera-facing unit normals from a depth raster.

    A pixel gets an invalid normal when fewer than four valid points fall in
    its window, when the windowed points are (near-)collinear, or when the
    fitted plane contains the viewing ray so no facing direction exists.
    """
    if window < 3 or window % 2 == 0:
        raise ConfigError(f"window must be an odd integer >= 3, got {window}")
    h, w = depth.values.shape
    half = window // 2

    grid = pixel_grid(intr)
    points = np.zeros((h, w, 3), dtype=np.float64)
    if np.any(depth.valid):
        points[depth.valid] = backproject(
            grid[depth.valid], depth.values[depth.valid], intr
        )
        # Recentering before the moment sums keeps the covariance well
        # conditioned for distant geometry.
        points[depth.valid] -= points[depth.valid].mean(axis=0)

    mask = depth.valid.astype(np.float64)
    counts = _box_sum(mask, half)

    sums = np.empty((h, w, 3), dtype=np.float64)
    for k in range(3):
        sums[..., k] = _box_sum(points[..., k] * mask, half)

    prods = np.empty((h, w, 3, 3), dtype=np.float64)
    for i in range(3):
        for j in range(i, 3):
            s = _box_sum(points[..., i] * points[..., j] * mask, half)
            prods[..., i, j] = s
            prods[..., j, i] = s

    usable = depth.valid & (counts >= _MIN_NEIGHBORS)
    out = np.full((h, w, 3), np.nan, dtype=np.float64)
    if not np.any(usable):
        return NormalMap(values=out, valid=np.zeros((h, w), dtype=bool))

    n = counts[usable][:, None, None]
    mean = sums[usable] / counts[usable][:, None]
    cov = prods[usable] / n - mean[:, :, None] * mean[:, None, :]

    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0]
    spread_ok = eigvals[:, 1] > _RELATIVE_RANK_TOL * np.maximum(eigvals[:, 2], 0.0)
    spread_ok &= eigvals[:, 2] > 0.0

    view = rays(grid[usable], intr)
    facing = np.sum(normals * view, axis=1)
    normals = np.where(facing[:, None] > 0.0, -normals, normals)
    oriented = facing != 0.0

    keep = spread_ok & oriented
    valid = np.zeros((h, w), dtype=bool)
    valid_idx = np.flatnonzero(usable.ravel())[keep]
    valid.ravel()[valid_idx] = True
    out[valid] = normals[keep]
    return NormalMap(values=out, valid=valid)


def _weighted_affine(s: np.ndarray, r: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    total = weights.sum()
    if total <= 0.0:
        raise DegenerateFit("all samples were rejected during reweighting")
    ms = float(np.dot(weights, s) / total)
    mr = float(np.dot(weights, r) / total)
    ds = s - ms
    var = float(np.dot(weights, ds * ds))
    if var == 0.0:
        raise DegenerateFit("source depth has no spread on the joint support")
    a = float(np.dot(weights, ds * (r - mr)) / var)
    return a, mr - a * ms


def align_depth_affine(
    src: DepthMap, ref: DepthMap, robust_iters: int = 10
) -> tuple[float, float, DepthMap]:
    """Fit ref ~= a * src + b over jointly valid pixels, robust to outliers.

    Uses iteratively reweighted least squares with Tukey-style weights; the
    residual scale is refreshed each round from the median absolute residual.

    Returns:
        (a, b, aligned) with a > 0; ``aligned`` is a*src+b with the validity
        mask of ``src``.

    Raises:
        InsufficientData: fewer than 16 jointly valid pixels.
        DegenerateFit: constant source depth, or the fit collapses (a <= 0).
    """
    if robust_iters < 0:
        raise ConfigError("robust_iters must be non-negative")
    if src.values.shape != ref.values.shape:
        raise ConfigError(
            f"depth shapes differ: {src.values.shape} vs {ref.values.shape}"
        )
    joint = src.valid & ref.valid
    count = int(np.count_nonzero(joint))
    if count < 16:
        raise InsufficientData(f"only {count} jointly valid pixels, need at least 16")
    s = src.values[joint]
    r = ref.values[joint]

    a, b = _weighted_affine(s, r, np.ones_like(s))
    for _ in range(robust_iters):
        resid = a * s + b - r
        scale = float(np.median(np.abs(resid)))
        if scale == 0.0:
            break
        cut = _TUKEY_C * scale
        u = resid / cut
        weights = np.where(np.abs(u) < 1.0, (1.0 - u * u) ** 2, 0.0)
        a, b = _weighted_affine(s, r, weights)

    if a <= 0.0:
        raise DegenerateFit(f"alignment collapsed to non-positive gain a={a:.3g}")
    aligned = DepthMap(
        values=np.where(src.valid, a * src.values + b, np.nan),
        valid=src.valid.copy(),
    )
    return a, b, aligned
