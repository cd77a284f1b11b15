"""Shared reference implementations for the tests.

Everything here is deliberately written independently of the library's
vectorized code paths: scalar loops, explicit formulas, no reuse of the
modules under test beyond their data containers.
"""

from __future__ import annotations

import math

import numpy as np

from cvbench.rasters import CovisLabel


def discontinuity_mask(depth) -> np.ndarray:
    """Pixels sitting on a depth discontinuity.

    A discontinuity is a >10% relative jump between 4-neighbours, or a
    valid/invalid boundary.
    """
    v = depth.values
    ok = depth.valid
    m = np.zeros(v.shape, dtype=bool)
    for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
        nv = np.roll(v, shift, axis=axis)
        nok = np.roll(ok, shift, axis=axis)
        edge = np.zeros(v.shape, dtype=bool)
        if axis == 0:
            edge[0 if shift == 1 else -1, :] = True
        else:
            edge[:, 0 if shift == 1 else -1] = True
        with np.errstate(invalid="ignore"):
            jump = np.abs(v - nv) / np.minimum(np.abs(v), np.abs(nv)) > 0.10
        m |= ok & ~edge & (~nok | (nok & np.nan_to_num(jump)))
    return m


def dilate(mask: np.ndarray, rounds: int = 1) -> np.ndarray:
    out = mask.copy()
    for _ in range(rounds):
        p = np.pad(out, 1)
        out = (
            p[:-2, :-2] | p[:-2, 1:-1] | p[:-2, 2:]
            | p[1:-1, :-2] | p[1:-1, 1:-1] | p[1:-1, 2:]
            | p[2:, :-2] | p[2:, 1:-1] | p[2:, 2:]
        )
    return out


def agreement_band(depth_self, depth_other, warp) -> np.ndarray:
    """The 1-pixel exclusion band for oracle comparisons.

    Near a discontinuity in the source view, or warping to within one
    pixel of a discontinuity in the target view (which is where occlusion
    boundaries live when the source surface itself is smooth).
    """
    band = dilate(discontinuity_mask(depth_self), 1)
    other = dilate(discontinuity_mask(depth_other), 1)
    xy = warp.target_xy
    finite = np.isfinite(xy).all(axis=-1)
    x0 = np.floor(np.nan_to_num(xy[..., 0])).astype(int)
    y0 = np.floor(np.nan_to_num(xy[..., 1])).astype(int)
    h, w = depth_other.values.shape
    near = np.zeros(band.shape, dtype=bool)
    for dx in (0, 1):
        for dy in (0, 1):
            xc = np.clip(x0 + dx, 0, w - 1)
            yc = np.clip(y0 + dy, 0, h - 1)
            near |= finite & other[yc, xc]
    return band | near


def enumerate_direction(depth, covis, intr, other_center) -> tuple[list, list]:
    """Scalar per-pixel enumeration of (ratio, angle) samples.

    other_center is the other camera's center in this camera's frame.
    """
    ratios: list[float] = []
    angles: list[float] = []
    h, w = depth.values.shape
    cx, cy, fx, fy = intr.cx, intr.cy, intr.fx, intr.fy
    ox, oy, oz = (float(c) for c in other_center)
    for row in range(h):
        for col in range(w):
            if covis.labels[row, col] != int(CovisLabel.CO_VISIBLE):
                continue
            d = float(depth.values[row, col])
            if not (d > 0.0 and math.isfinite(d)):
                continue
            px = (col - cx) / fx * d
            py = (row - cy) / fy * d
            pz = d
            qx, qy, qz = px - ox, py - oy, pz - oz
            d_self = math.sqrt(px * px + py * py + pz * pz)
            d_other = math.sqrt(qx * qx + qy * qy + qz * qz)
            if d_self == 0.0 or d_other == 0.0:
                continue
            ratios.append(max(d_self / d_other, d_other / d_self))
            cos_a = (px * qx + py * qy + pz * qz) / (d_self * d_other)
            cos_a = min(1.0, max(-1.0, cos_a))
            angles.append(math.degrees(math.acos(cos_a)))
    return ratios, angles


def lower_median_ref(values) -> float:
    s = sorted(values)
    return s[(len(s) - 1) // 2]


def enumerate_criteria(depth_a, depth_b, covis_ab, covis_ba, intr_a, intr_b, pose_a, pose_b):
    """Independent (omega, delta, theta) for a pair from its label maps."""
    r_a = pose_a.rotation
    r_b = pose_b.rotation
    c_a = pose_a.translation
    c_b = pose_b.translation
    # other camera's center in this camera's frame: R^T (c_other - c_self)
    t_ab = r_a.T @ (c_b - c_a)
    t_ba = r_b.T @ (c_a - c_b)
    ratios_ab, angles_ab = enumerate_direction(depth_a, covis_ab, intr_a, t_ab)
    ratios_ba, angles_ba = enumerate_direction(depth_b, covis_ba, intr_b, t_ba)
    n_ab = int((covis_ab.labels == int(CovisLabel.CO_VISIBLE)).sum())
    n_ba = int((covis_ba.labels == int(CovisLabel.CO_VISIBLE)).sum())
    omega = (n_ab + n_ba) / (covis_ab.labels.size + covis_ba.labels.size)
    delta = lower_median_ref(ratios_ab + ratios_ba)
    theta = lower_median_ref(angles_ab + angles_ba)
    return omega, delta, theta


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random rotation from a normalized random quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


# --- a second, scalar ray caster (independent of cvbench.synth) ---


def _hit_plane(origin, direction, point, normal):
    denom = sum(normal[i] * direction[i] for i in range(3))
    if abs(denom) < 1e-12:
        return None
    t = sum(normal[i] * (point[i] - origin[i]) for i in range(3)) / denom
    return t if t > 1e-9 else None


def _hit_sphere(origin, direction, center, radius):
    oc = [origin[i] - center[i] for i in range(3)]
    b = 2.0 * sum(oc[i] * direction[i] for i in range(3))
    c = sum(v * v for v in oc) - radius * radius
    disc = b * b - 4.0 * c
    if disc < 0.0:
        return None
    root = math.sqrt(disc)
    for t in ((-b - root) / 2.0, (-b + root) / 2.0):
        if t > 1e-9:
            return t
    return None


def _hit_box(origin, direction, lo, hi):
    """Box intersection via its six face planes, nearest containing hit."""
    best = None
    for axis in range(3):
        for plane_val in (lo[axis], hi[axis]):
            if abs(direction[axis]) < 1e-12:
                continue
            t = (plane_val - origin[axis]) / direction[axis]
            if t <= 1e-9:
                continue
            point = [origin[i] + t * direction[i] for i in range(3)]
            inside = all(
                lo[i] - 1e-9 <= point[i] <= hi[i] + 1e-9
                for i in range(3)
                if i != axis
            )
            if inside and (best is None or t < best):
                best = t
    return best


def scalar_cast(primitives, origin, direction):
    """Nearest hit parameter over a list of ('plane'|'sphere'|'box', params)."""
    best = math.inf
    for kind, params in primitives:
        if kind == "plane":
            t = _hit_plane(origin, direction, *params)
        elif kind == "sphere":
            t = _hit_sphere(origin, direction, *params)
        elif kind == "box":
            t = _hit_box(origin, direction, *params)
        else:
            raise ValueError(kind)
        if t is not None and t < best:
            best = t
    return best if math.isfinite(best) else None


def scalar_depth_render(primitives, intr, pose) -> np.ndarray:
    """Scalar z-depth render; NaN where no surface is hit.

    Rays are cast with unit world directions, so the hit parameter is a
    Euclidean range; z-depth is that range times the z-component of the
    unit ray in the camera frame.
    """
    h, w = intr.height, intr.width
    out = np.full((h, w), np.nan)
    r = pose.rotation
    origin = [float(v) for v in pose.translation]
    for row in range(h):
        for col in range(w):
            dc = [(col - intr.cx) / intr.fx, (row - intr.cy) / intr.fy, 1.0]
            dc_norm = math.sqrt(sum(v * v for v in dc))
            dw = [sum(r[i][j] * dc[j] for j in range(3)) for i in range(3)]
            dwn = [v / dc_norm for v in dw]
            t = scalar_cast(primitives, origin, dwn)
            if t is not None:
                out[row, col] = t / dc_norm
    return out
