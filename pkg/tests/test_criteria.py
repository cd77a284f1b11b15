"""Tests for the three pair-difficulty criteria.

Single-pixel label maps pin the per-point arithmetic to hand-computed
values; scene-level cases are checked against a scalar per-pixel
enumeration that shares no code with the library.
"""

import numpy as np
import pytest

from cvbench import (
    Box,
    CameraIntrinsics,
    CovisLabel,
    CovisibilityMap,
    DepthMap,
    EmptyCovisibility,
    Plane,
    RelativePose,
    RigidPose,
    Scene,
    compute_criteria,
    criteria_from_maps,
    covisibility_pair,
    lower_median,
    normals_from_depth,
    overlap,
    relative_pose,
    render,
    scale_ratio,
    viewpoint_angle,
)

from helpers import enumerate_criteria, enumerate_direction, lower_median_ref

INTR = CameraIntrinsics(fx=50.0, fy=50.0, cx=32.0, cy=24.0, width=65, height=49)

IDENTITY = RigidPose(rotation=np.eye(3), translation=np.zeros(3))


def pose_at(translation, rotation=None):
    return RigidPose(
        rotation=np.eye(3) if rotation is None else rotation,
        translation=np.asarray(translation, dtype=np.float64),
    )


def yaw(deg):
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def labels_full(label):
    return CovisibilityMap(
        labels=np.full((INTR.height, INTR.width), int(label), dtype=np.uint8)
    )


def single_pixel_inputs(depth_value, row=24, col=32):
    """A depth map and label map that are valid at exactly one pixel."""
    values = np.full((INTR.height, INTR.width), np.nan)
    values[row, col] = depth_value
    labels = np.full(
        (INTR.height, INTR.width), int(CovisLabel.INVALID), dtype=np.uint8
    )
    labels[row, col] = int(CovisLabel.CO_VISIBLE)
    return DepthMap.from_array(values), CovisibilityMap(labels=labels)


def empty_inputs():
    values = np.full((INTR.height, INTR.width), np.nan)
    return DepthMap.from_array(values), labels_full(CovisLabel.INVALID)


class TestLowerMedian:
    def test_odd_count(self):
        assert lower_median(np.array([3.0, 1.0, 2.0])) == 2.0

    def test_even_count_takes_lower(self):
        assert lower_median(np.array([4.0, 1.0, 3.0, 2.0])) == 2.0

    def test_single(self):
        assert lower_median(np.array([7.5])) == 7.5

    def test_empty_raises(self):
        with pytest.raises(EmptyCovisibility):
            lower_median(np.array([]))

    def test_matches_reference(self):
        rng = np.random.default_rng(2)
        for n in (1, 2, 3, 10, 11, 100):
            values = rng.uniform(0.0, 5.0, size=n)
            assert lower_median(values) == lower_median_ref(values.tolist())


class TestOverlap:
    def test_full(self):
        cm = labels_full(CovisLabel.CO_VISIBLE)
        assert overlap(cm, cm) == 1.0

    def test_none(self):
        cm = labels_full(CovisLabel.OCCLUDED)
        assert overlap(cm, cm) == 0.0

    def test_ratio_arithmetic(self):
        # 300 of 1000 and 100 of 1000 co-visible pixels -> 0.2 exactly
        a = np.zeros(1000, dtype=np.uint8)
        a[:300] = int(CovisLabel.CO_VISIBLE)
        b = np.zeros(1000, dtype=np.uint8)
        b[:100] = int(CovisLabel.CO_VISIBLE)
        cm_a = CovisibilityMap(labels=a.reshape(20, 50))
        cm_b = CovisibilityMap(labels=b.reshape(20, 50))
        assert overlap(cm_a, cm_b) == 0.2


class TestScaleRatio:
    def test_zero_translation_is_one_exactly(self):
        depth, covis = single_pixel_inputs(4.0)
        rel = RelativePose(rotation=yaw(30.0), translation=np.zeros(3))
        empty_d, empty_c = empty_inputs()
        r = scale_ratio(depth, empty_d, covis, empty_c, INTR, INTR, rel)
        assert r == 1.0

    def test_halved_distance_center_pixel(self):
        # On-axis point at z=4 seen from the origin and from (0,0,2):
        # distances 4 and 2, ratio exactly 2.
        depth, covis = single_pixel_inputs(4.0)
        rel = RelativePose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 2.0]))
        empty_d, empty_c = empty_inputs()
        r = scale_ratio(depth, empty_d, covis, empty_c, INTR, INTR, rel)
        assert r == 2.0

    def test_ratio_at_least_one_either_way(self):
        # Moving the other camera further out must give the same ratio.
        depth, covis = single_pixel_inputs(2.0)
        empty_d, empty_c = empty_inputs()
        near = RelativePose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 1.0]))
        far = RelativePose(rotation=np.eye(3), translation=np.array([0.0, 0.0, -2.0]))
        r_near = scale_ratio(depth, empty_d, covis, empty_c, INTR, INTR, near)
        r_far = scale_ratio(depth, empty_d, covis, empty_c, INTR, INTR, far)
        assert r_near == 2.0  # distances 2 and 1
        assert r_far == 2.0  # distances 2 and 4

    def test_rotation_does_not_change_sample(self):
        depth, covis = single_pixel_inputs(4.0)
        empty_d, empty_c = empty_inputs()
        t = np.array([0.0, 0.0, 2.0])
        plain = RelativePose(rotation=np.eye(3), translation=t)
        turned = RelativePose(rotation=yaw(70.0), translation=t)
        r1 = scale_ratio(depth, empty_d, covis, empty_c, INTR, INTR, plain)
        r2 = scale_ratio(depth, empty_d, covis, empty_c, INTR, INTR, turned)
        assert r1 == r2

    def test_empty_raises(self):
        empty_d, empty_c = empty_inputs()
        rel = RelativePose(rotation=np.eye(3), translation=np.zeros(3))
        with pytest.raises(EmptyCovisibility):
            scale_ratio(empty_d, empty_d, empty_c, empty_c, INTR, INTR, rel)


class TestViewpointAngle:
    def test_zero_translation_is_zero_exactly(self):
        depth, covis = single_pixel_inputs(4.0)
        rel = RelativePose(rotation=yaw(30.0), translation=np.zeros(3))
        empty_d, empty_c = empty_inputs()
        a = viewpoint_angle(depth, empty_d, covis, empty_c, INTR, INTR, rel)
        assert a == 0.0

    def test_right_angle_construction(self):
        # Point (0,0,4), other camera at (4,0,4): sight lines (0,0,4)
        # and (-4,0,0) meet at 90 degrees.
        depth, covis = single_pixel_inputs(4.0)
        rel = RelativePose(rotation=np.eye(3), translation=np.array([4.0, 0.0, 4.0]))
        empty_d, empty_c = empty_inputs()
        a = viewpoint_angle(depth, empty_d, covis, empty_c, INTR, INTR, rel)
        assert a == 90.0

    def test_point_at_other_center_skipped(self):
        # The lone sample sits exactly at the other camera's center, so it
        # is skipped and nothing remains.
        depth, covis = single_pixel_inputs(4.0)
        rel = RelativePose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 4.0]))
        empty_d, empty_c = empty_inputs()
        with pytest.raises(EmptyCovisibility):
            viewpoint_angle(depth, empty_d, covis, empty_c, INTR, INTR, rel)

    def test_angle_unchanged_by_other_distance(self):
        # Scaling the other sight line moves delta but not theta.
        depth, covis = single_pixel_inputs(4.0)
        empty_d, empty_c = empty_inputs()
        near = RelativePose(rotation=np.eye(3), translation=np.array([1.0, 0.0, 4.0]))
        far = RelativePose(rotation=np.eye(3), translation=np.array([3.0, 0.0, 4.0]))
        a_near = viewpoint_angle(depth, empty_d, covis, empty_c, INTR, INTR, near)
        a_far = viewpoint_angle(depth, empty_d, covis, empty_c, INTR, INTR, far)
        assert a_near == a_far == 90.0
        r_near = scale_ratio(depth, empty_d, covis, empty_c, INTR, INTR, near)
        r_far = scale_ratio(depth, empty_d, covis, empty_c, INTR, INTR, far)
        assert r_near != r_far


def render_view(scene, pose):
    depth, _ = render(scene, INTR, pose)
    return depth, normals_from_depth(depth, INTR)


def street_scene():
    return Scene(
        [
            Plane(point=(0.0, 2.0, 0.0), normal=(0.0, -1.0, 0.0)),
            Box(lo=(-2.5, -0.5, 6.0), hi=(-0.5, 2.0, 7.5)),
            Box(lo=(1.0, 0.2, 9.0), hi=(3.0, 2.0, 10.5)),
        ]
    )


def pair_inputs(scene, pose_a, pose_b):
    depth_a, normals_a = render_view(scene, pose_a)
    depth_b, normals_b = render_view(scene, pose_b)
    return (
        INTR, depth_a, normals_a, pose_a,
        INTR, depth_b, normals_b, pose_b,
    )


class TestComputeCriteria:
    def test_identity_pair(self):
        scene = Scene([Plane(point=(0.0, 0.0, 5.0), normal=(0.0, 0.0, -1.0))])
        crit = compute_criteria(*pair_inputs(scene, IDENTITY, IDENTITY))
        assert crit.omega == 1.0
        assert crit.delta == 1.0
        assert crit.theta_deg == 0.0

    def test_pure_rotation(self):
        scene = Scene([Plane(point=(0.0, 0.0, 6.0), normal=(0.0, 0.0, -1.0))])
        pose_b = pose_at([0.0, 0.0, 0.0], yaw(20.0))
        crit = compute_criteria(*pair_inputs(scene, IDENTITY, pose_b))
        assert 0.0 < crit.omega < 1.0
        assert crit.delta == 1.0
        assert crit.theta_deg == 0.0

    def test_opposite_facing_raises(self):
        scene = Scene(
            [
                Plane(point=(0.0, 0.0, 6.0), normal=(0.0, 0.0, -1.0)),
                Plane(point=(0.0, 0.0, -6.0), normal=(0.0, 0.0, 1.0)),
            ]
        )
        pose_b = pose_at([0.0, 0.0, 0.0], yaw(180.0))
        with pytest.raises(EmptyCovisibility):
            compute_criteria(*pair_inputs(scene, IDENTITY, pose_b))

    def test_swap_symmetry(self):
        scene = street_scene()
        pose_a = pose_at([0.0, 0.0, 0.0], yaw(3.0))
        pose_b = pose_at([0.7, -0.1, 0.4], yaw(-9.0))
        ab = compute_criteria(*pair_inputs(scene, pose_a, pose_b))
        ba = compute_criteria(*pair_inputs(scene, pose_b, pose_a))
        assert ab.omega == ba.omega
        assert ab.delta == ba.delta
        assert ab.theta_deg == ba.theta_deg
        assert (ab.covis_pixels_ab, ab.covis_pixels_ba) == (
            ba.covis_pixels_ba,
            ba.covis_pixels_ab,
        )

    def test_value_ranges(self):
        scene = street_scene()
        crit = compute_criteria(
            *pair_inputs(scene, IDENTITY, pose_at([0.6, 0.0, 0.3], yaw(-8.0)))
        )
        assert 0.0 <= crit.omega <= 1.0
        assert crit.delta >= 1.0
        assert 0.0 <= crit.theta_deg <= 180.0
        for value in (crit.omega, crit.delta, crit.theta_deg):
            assert np.isfinite(value)

    def test_rigid_invariance(self):
        # One global rigid motion applied to scene and cameras together
        # leaves the pair geometry, and so the criteria, unchanged.
        scene = street_scene()
        pose_a = IDENTITY
        pose_b = pose_at([0.7, 0.0, 0.4], yaw(-9.0))
        depth_a, normals_a = render_view(scene, pose_a)
        depth_b, normals_b = render_view(scene, pose_b)
        covis_ab, covis_ba = covisibility_pair(
            INTR, depth_a, normals_a, pose_a, INTR, depth_b, normals_b, pose_b
        )
        base = criteria_from_maps(
            INTR, depth_a, pose_a, INTR, depth_b, pose_b, covis_ab, covis_ba
        )

        g_rot = yaw(37.0) @ np.array(
            [[1.0, 0.0, 0.0],
             [0.0, np.cos(0.3), -np.sin(0.3)],
             [0.0, np.sin(0.3), np.cos(0.3)]]
        )
        g_t = np.array([5.0, -2.0, 1.0])

        def moved(pose):
            return RigidPose(
                rotation=g_rot @ pose.rotation,
                translation=g_rot @ pose.translation + g_t,
            )

        # The rasters a moved rig would record are identical, so reuse them.
        shifted = criteria_from_maps(
            INTR, depth_a, moved(pose_a), INTR, depth_b, moved(pose_b),
            covis_ab, covis_ba,
        )
        assert shifted.omega == base.omega
        assert abs(shifted.delta - base.delta) < 1e-9
        assert abs(shifted.theta_deg - base.theta_deg) < 1e-9

    def test_matches_scalar_enumeration(self):
        scene = street_scene()
        pose_a = IDENTITY
        pose_b = pose_at([0.7, 0.0, 0.4], yaw(-9.0))
        depth_a, normals_a = render_view(scene, pose_a)
        depth_b, normals_b = render_view(scene, pose_b)
        covis_ab, covis_ba = covisibility_pair(
            INTR, depth_a, normals_a, pose_a, INTR, depth_b, normals_b, pose_b
        )
        crit = criteria_from_maps(
            INTR, depth_a, pose_a, INTR, depth_b, pose_b, covis_ab, covis_ba
        )
        ref_omega, ref_delta, ref_theta = enumerate_criteria(
            depth_a, depth_b, covis_ab, covis_ba, INTR, INTR, pose_a, pose_b
        )
        assert abs(crit.omega - ref_omega) < 1e-6
        assert abs(crit.delta - ref_delta) < 1e-6
        assert abs(crit.theta_deg - ref_theta) < 1e-6

    def test_full_image_median_on_approach(self):
        # Fronto-parallel wall with the second camera halfway in: compare
        # the module's median against a scalar enumeration of every pixel.
        scene = Scene([Plane(point=(0.0, 0.0, 4.0), normal=(0.0, 0.0, -1.0))])
        pose_b = pose_at([0.0, 0.0, 2.0])
        depth_a, normals_a = render_view(scene, IDENTITY)
        depth_b, normals_b = render_view(scene, pose_b)
        covis_ab, covis_ba = covisibility_pair(
            INTR, depth_a, normals_a, IDENTITY, INTR, depth_b, normals_b, pose_b
        )
        crit = criteria_from_maps(
            INTR, depth_a, IDENTITY, INTR, depth_b, pose_b, covis_ab, covis_ba
        )
        r_ab, _ = enumerate_direction(
            depth_a, covis_ab, INTR, np.array([0.0, 0.0, 2.0])
        )
        r_ba, _ = enumerate_direction(
            depth_b, covis_ba, INTR, np.array([0.0, 0.0, -2.0])
        )
        assert crit.delta == pytest.approx(lower_median_ref(r_ab + r_ba), abs=1e-9)
        # the exact on-axis pixel of view A sees the 4 m wall from 4 m and
        # from 2 m: its personal ratio is exactly 2, the image maximum
        assert max(r_ab) == 2.0
        assert 1.0 < crit.delta < 2.0
