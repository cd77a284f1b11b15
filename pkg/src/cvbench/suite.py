"""The built-in synthetic fixture suite.

Thirteen camera pairs over analytic scenes, chosen to span the three
difficulty criteria: an identity pair, a pure rotation, an opposite-view
pair with no shared surface, a telephoto halving-distance plane, forward
motion at two baselines, three equal-radius arcs, a lateral shift, a pair
of down-tilted cameras facing each other, a combined approach-plus-arc
pair and a heavily occluded lateral pair.

Scene layout rules that keep the suite honest as oracle material: surfaces
are either clearly front-facing or clearly edge-on to both cameras (never
a few degrees from the facing-test boundary), and cameras never pitch
upward over a ground plane. Box jitter comes from the suite seed, so a
rerun with the same seed writes byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, RigidPose, relative_pose
from .io import CameraRecord, write_cameras, write_matches, write_pairs
from .poseeval import MatchSet
from .rasters import (
    CovisLabel,
    write_covis,
    write_depth,
    write_normals,
)
from .synth import Box, Plane, Scene, oracle_covis, oracle_matches, render

DEFAULT_INTR = CameraIntrinsics(fx=400.0, fy=400.0, cx=159.5, cy=119.5, width=320, height=240)
TELE_INTR = CameraIntrinsics(fx=2000.0, fy=2000.0, cx=159.5, cy=119.5, width=320, height=240)

MATCHES_PER_PAIR = 150


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> RigidPose:
    """World-from-camera pose for a camera at ``eye`` looking at ``target``.

    Camera axes: x right, y down, z forward; ``up`` fixes the roll.
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    forward = target - eye
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    rotation = np.stack([right, down, forward], axis=1)
    return RigidPose(rotation=rotation, translation=eye)


def _ground() -> Plane:
    return Plane(point=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0))


def _street_scene(rng: np.random.Generator) -> Scene:
    """Ground, a wide back wall, and three boxes with jittered footprints."""

    def jit(lo: float, hi: float) -> float:
        return float(rng.uniform(lo, hi))

    boxes = [
        Box(
            lo=(5.5 + jit(-0.3, 0.3), -3.2 + jit(-0.2, 0.2), 0.0),
            hi=(6.8 + jit(-0.2, 0.2), -2.2 + jit(-0.1, 0.1), 1.6 + jit(-0.2, 0.2)),
        ),
        Box(
            lo=(7.5 + jit(-0.3, 0.3), 2.0 + jit(-0.2, 0.2), 0.0),
            hi=(8.6 + jit(-0.2, 0.2), 3.0 + jit(-0.1, 0.1), 1.3 + jit(-0.2, 0.2)),
        ),
        Box(
            lo=(9.5 + jit(-0.2, 0.2), -1.0 + jit(-0.2, 0.2), 0.0),
            hi=(10.3 + jit(-0.2, 0.2), 0.2 + jit(-0.1, 0.1), 1.1 + jit(-0.2, 0.2)),
        ),
    ]
    wall = Box(lo=(12.0, -10.0, 0.0), hi=(12.3, 10.0, 6.5))
    return Scene(primitives=(_ground(), wall, *boxes))


def _arc_pair(arc_deg: float) -> tuple[Scene, RigidPose, RigidPose]:
    """Two cameras on a circle around a focal point, looking at it.

    The focal point sits on the front face of a box, so the sight-line
    angle at the principal pixel equals the arc angle by construction.
    Wide arcs get a shadow-free scene: near 90 degrees of separation, one
    camera's occlusion shadows displace surface points almost parallel to
    the other camera's image plane, where a depth comparison cannot see
    them, so nothing may stand in front of the wall there.
    """
    focal = np.array([8.0, 0.0, 1.0])
    radius = 8.0
    half = np.radians(arc_deg / 2.0)

    def cam(sign: float) -> RigidPose:
        eye = focal + radius * np.array([-np.cos(sign * half), -np.sin(sign * half), 0.0])
        eye[2] = 1.5
        return look_at(eye, focal)

    if arc_deg >= 60.0:
        scene = Scene(
            primitives=(
                _ground(),
                Box(lo=(8.0, -9.0, 0.0), hi=(8.3, 9.0, 5.5)),  # focal face at x=8
            )
        )
    else:
        scene = Scene(
            primitives=(
                _ground(),
                Box(lo=(9.5, -7.0, 0.0), hi=(9.8, 7.0, 5.5)),
                Box(lo=(8.0, -0.5, 0.0), hi=(8.8, 0.5, 1.4)),  # focal face at x=8
                Box(lo=(6.4, 1.2, 0.0), hi=(7.2, 2.0, 1.0)),
            )
        )
    return scene, cam(+1.0), cam(-1.0)


@dataclass
class Fixture:
    pair_id: str
    scene: Scene
    intr_a: CameraIntrinsics
    pose_a: RigidPose
    intr_b: CameraIntrinsics
    pose_b: RigidPose
    note: str = ""


def build_fixtures(seed: int = 0) -> list[Fixture]:
    fixtures: list[Fixture] = []

    def street(idx: int) -> Scene:
        return _street_scene(np.random.default_rng([seed, idx]))

    # Identity: a fully covered field of view, both images the same camera.
    room = Scene(
        primitives=(
            _ground(),
            Box(lo=(12.0, -10.0, 0.0), hi=(12.3, 10.0, 6.5)),
            Box(lo=(6.0, -2.5, 0.0), hi=(7.0, -1.5, 1.2)),
            Box(lo=(8.0, 1.0, 0.0), hi=(9.0, 2.2, 1.8)),
        )
    )
    cam_front = look_at((0.0, 0.0, 1.5), (12.0, 0.0, 1.0))
    fixtures.append(
        Fixture("identity", room, DEFAULT_INTR, cam_front, DEFAULT_INTR, cam_front)
    )

    # Pure rotation: no interior objects, so every visible surface stays far
    # from the facing-test boundary in both views.
    rot_scene = Scene(
        primitives=(_ground(), Box(lo=(12.0, -12.0, 0.0), hi=(12.3, 12.0, 6.5)))
    )
    yaw = np.radians(12.0)
    target_b = (12.0 * np.cos(yaw), 12.0 * np.sin(yaw), 1.0)
    fixtures.append(
        Fixture(
            "rot_yaw12",
            rot_scene,
            DEFAULT_INTR,
            look_at((0.0, 0.0, 1.5), (12.0, 0.0, 1.0)),
            DEFAULT_INTR,
            look_at((0.0, 0.0, 1.5), target_b),
            note="zero baseline",
        )
    )

    # Opposite: back to back, nothing co-visible.
    opp_scene = Scene(
        primitives=(
            _ground(),
            Box(lo=(12.0, -10.0, 0.0), hi=(12.3, 10.0, 6.5)),
            Box(lo=(-12.3, -10.0, 0.0), hi=(-12.0, 10.0, 6.5)),
        )
    )
    fixtures.append(
        Fixture(
            "opposite",
            opp_scene,
            DEFAULT_INTR,
            look_at((0.0, 0.0, 1.5), (12.0, 0.0, 1.0)),
            DEFAULT_INTR,
            look_at((0.0, 0.0, 1.5), (-12.0, 0.0, 1.0)),
            note="no co-visibility",
        )
    )

    # Halving-distance plane under a telephoto lens: the narrow field keeps
    # every pixel's distance ratio within a percent of the on-axis value 2.
    plane_scene = Scene(primitives=(Plane(point=(5.0, 0.0, 0.0), normal=(-1.0, 0.0, 0.0)),))
    fixtures.append(
        Fixture(
            "plane_half",
            plane_scene,
            TELE_INTR,
            look_at((0.0, 0.0, 1.5), (5.0, 0.0, 1.5)),
            TELE_INTR,
            look_at((2.5, 0.0, 1.5), (5.0, 0.0, 1.5)),
            note="fronto-parallel plane, camera 2 at half distance",
        )
    )

    # Forward motion at two baselines over the same street layout.
    scene_fwd = street(1)
    fixtures.append(
        Fixture(
            "forward_1m",
            scene_fwd,
            DEFAULT_INTR,
            look_at((0.0, 0.0, 1.5), (12.0, 0.0, 1.0)),
            DEFAULT_INTR,
            look_at((1.0, 0.0, 1.5), (13.0, 0.0, 1.0)),
        )
    )
    fixtures.append(
        Fixture(
            "forward_5m",
            scene_fwd,
            DEFAULT_INTR,
            look_at((0.0, 0.0, 1.5), (12.0, 0.0, 1.0)),
            DEFAULT_INTR,
            look_at((5.0, 0.0, 1.5), (17.0, 0.0, 1.0)),
        )
    )

    for arc in (30.0, 45.0, 75.0):
        scene_arc, cam_a, cam_b = _arc_pair(arc)
        fixtures.append(
            Fixture(
                f"arc{arc:g}",
                scene_arc,
                DEFAULT_INTR,
                cam_a,
                DEFAULT_INTR,
                cam_b,
                note=f"equal-radius arc of {arc:g} degrees about the focal point",
            )
        )

    fixtures.append(
        Fixture(
            "lateral_2m",
            street(2),
            DEFAULT_INTR,
            look_at((0.0, -1.0, 1.6), (12.0, -1.0, 1.0)),
            DEFAULT_INTR,
            look_at((0.0, 1.0, 1.6), (12.0, 1.0, 1.0)),
        )
    )

    # Two cameras facing each other, tilted down at a strip of ground and
    # low slabs between them: the top viewpoint-angle bin.
    slab_scene = Scene(
        primitives=(
            _ground(),
            Box(lo=(6.2, -1.6, 0.0), hi=(7.0, -0.8, 0.35)),
            Box(lo=(6.4, -0.4, 0.0), hi=(7.2, 0.4, 0.35)),
            Box(lo=(6.2, 0.8, 0.0), hi=(7.0, 1.6, 0.35)),
        )
    )
    drop = 2.5 / np.tan(np.radians(35.0))
    fixtures.append(
        Fixture(
            "facing_down",
            slab_scene,
            DEFAULT_INTR,
            look_at((0.0, 0.0, 2.5), (drop, 0.0, 0.0)),
            DEFAULT_INTR,
            look_at((13.5, 0.0, 2.5), (13.5 - drop, 0.0, 0.0)),
            note="cameras face each other, pitched down",
        )
    )

    # Approach plus arc: scale ratio near 3 with a moderate arc angle.
    focal = np.array([12.0, 0.0, 1.2])
    wall_scene = Scene(
        primitives=(
            _ground(),
            Box(lo=(13.2, -6.0, 0.0), hi=(13.5, 6.0, 5.0)),
            Box(lo=(11.0, -1.4, 0.0), hi=(11.9, -0.3, 1.6)),
            Box(lo=(10.6, 0.6, 0.0), hi=(11.4, 1.5, 1.2)),
        )
    )
    az_a, az_b = np.radians(12.0), np.radians(-46.0)
    eye_a = focal + 10.5 * np.array([-np.cos(az_a), -np.sin(az_a), 0.0])
    eye_b = focal + 3.2 * np.array([-np.cos(az_b), -np.sin(az_b), 0.0])
    eye_a[2] = 1.6
    eye_b[2] = 1.6
    fixtures.append(
        Fixture(
            "approach_arc",
            wall_scene,
            DEFAULT_INTR,
            look_at(eye_a, focal),
            DEFAULT_INTR,
            look_at(eye_b, focal),
            note="camera 2 three times closer, 40 degrees around",
        )
    )

    # Lateral pair with a large occluder between the viewpoints.
    occ_scene = Scene(
        primitives=(
            _ground(),
            Box(lo=(12.0, -10.0, 0.0), hi=(12.3, 10.0, 6.5)),
            Box(lo=(6.0, 0.3, 0.0), hi=(7.6, 2.2, 2.6)),
            Box(lo=(9.0, -3.0, 0.0), hi=(10.0, -1.8, 1.5)),
        )
    )
    fixtures.append(
        Fixture(
            "occluder",
            occ_scene,
            DEFAULT_INTR,
            look_at((0.0, 0.0, 1.6), (12.0, 0.0, 1.0)),
            DEFAULT_INTR,
            look_at((0.0, 2.5, 1.6), (12.0, 2.0, 1.0)),
        )
    )

    return fixtures


def _oracle_direction_stats(
    depth_values: np.ndarray,
    labels: np.ndarray,
    intr: CameraIntrinsics,
    pose_self: RigidPose,
    pose_other: RigidPose,
) -> tuple[np.ndarray, np.ndarray]:
    """Reference per-pixel ratio and angle samples from oracle labels."""
    sel = labels == int(CovisLabel.CO_VISIBLE)
    rows, cols = np.nonzero(sel)
    d = depth_values[rows, cols]
    x = (cols - intr.cx) / intr.fx * d
    y = (rows - intr.cy) / intr.fy * d
    pts = np.stack([x, y, d], axis=-1)
    t_other = relative_pose(pose_self, pose_other).translation
    to_other = pts - t_other
    d_self = np.linalg.norm(pts, axis=-1)
    d_other = np.linalg.norm(to_other, axis=-1)
    ratio = np.maximum(d_self / d_other, d_other / d_self)
    cosang = np.sum(pts * to_other, axis=-1) / (d_self * d_other)
    angle = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return ratio, angle


def _lower_median(values: np.ndarray) -> float:
    v = np.sort(values)
    return float(v[(v.size - 1) // 2])


def make_fixture_suite(out_dir: str | Path, seed: int = 0) -> dict:
    """Render the suite into ``out_dir`` and return its summary.

    Writes cameras.json, pairs.jsonl, depth/normal rasters, oracle
    co-visibility maps, oracle matches and truth.json (criteria computed
    from the oracle maps by direct enumeration, plus pair metadata).
    """
    out = Path(out_dir)
    for sub in ("depth", "normal", "oracle_covis"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    fixtures = build_fixtures(seed)
    cameras: list[CameraRecord] = []
    pairs: list[dict] = []
    matches: dict[str, MatchSet] = {}
    truth: dict[str, dict] = {}

    for idx, fx in enumerate(fixtures):
        id_a, id_b = f"{fx.pair_id}_a", f"{fx.pair_id}_b"
        cameras.append(CameraRecord(image_id=id_a, intr=fx.intr_a, pose=fx.pose_a))
        cameras.append(CameraRecord(image_id=id_b, intr=fx.intr_b, pose=fx.pose_b))
        pairs.append({"pair_id": fx.pair_id, "image_a": id_a, "image_b": id_b})

        depth_a, normal_a = render(fx.scene, fx.intr_a, fx.pose_a)
        depth_b, normal_b = render(fx.scene, fx.intr_b, fx.pose_b)
        write_depth(out / "depth" / f"{id_a}.cvb", depth_a)
        write_depth(out / "depth" / f"{id_b}.cvb", depth_b)
        write_normals(out / "normal" / f"{id_a}.cvb", normal_a)
        write_normals(out / "normal" / f"{id_b}.cvb", normal_b)

        covis_ab = oracle_covis(fx.scene, fx.intr_a, fx.pose_a, fx.intr_b, fx.pose_b)
        covis_ba = oracle_covis(fx.scene, fx.intr_b, fx.pose_b, fx.intr_a, fx.pose_a)
        write_covis(out / "oracle_covis" / f"{fx.pair_id}.ab.cvb", covis_ab)
        write_covis(out / "oracle_covis" / f"{fx.pair_id}.ba.cvb", covis_ba)

        n_ab = covis_ab.count(CovisLabel.CO_VISIBLE)
        n_ba = covis_ba.count(CovisLabel.CO_VISIBLE)
        baseline = relative_pose(fx.pose_a, fx.pose_b).baseline
        entry: dict = {
            "image_a": id_a,
            "image_b": id_b,
            "baseline_m": baseline,
            "covis_pixels_ab": n_ab,
            "covis_pixels_ba": n_ba,
            "note": fx.note,
        }
        if n_ab + n_ba > 0:
            r_ab, a_ab = _oracle_direction_stats(
                depth_a.values, covis_ab.labels, fx.intr_a, fx.pose_a, fx.pose_b
            )
            r_ba, a_ba = _oracle_direction_stats(
                depth_b.values, covis_ba.labels, fx.intr_b, fx.pose_b, fx.pose_a
            )
            total = depth_a.values.size + depth_b.values.size
            entry.update(
                {
                    "omega": (n_ab + n_ba) / total,
                    "delta": _lower_median(np.concatenate([r_ab, r_ba])),
                    "theta_deg": _lower_median(np.concatenate([a_ab, a_ba])),
                }
            )
            p1, p2 = oracle_matches(
                fx.scene,
                fx.intr_a,
                fx.pose_a,
                fx.intr_b,
                fx.pose_b,
                MATCHES_PER_PAIR,
                seed=seed * 1009 + idx,
            )
            if p1.shape[0] > 0:
                matches[fx.pair_id] = MatchSet(points1=p1, points2=p2)
        else:
            entry["criteria_undefined"] = True
        truth[fx.pair_id] = entry

    write_cameras(out / "cameras.json", cameras)
    write_pairs(out / "pairs.jsonl", pairs)
    write_matches(out / "matches.jsonl", matches)
    (out / "truth.json").write_text(
        json.dumps(truth, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return truth
