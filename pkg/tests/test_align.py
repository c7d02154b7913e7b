"""Rotation matrices, eye-leveling, warping, and crop-box geometry."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from facepipe.align import (
    AffineMatrix,
    CropBox,
    EyePair,
    eye_angle,
    face_crop_box,
    invert_affine,
    rotation_matrix,
    snap_crop_box,
    transform_point,
    warp_affine,
)
from facepipe.errors import DegenerateEyePairError, SingularMatrixError
from facepipe.image import GrayImage, Rect

coords = st.floats(-200, 200, allow_nan=False)
angles = st.floats(-180, 180, allow_nan=False)


# -- rotation matrix ---------------------------------------------------


def test_zero_angle_is_exact_identity():
    m = rotation_matrix((10.0, 20.0), 0.0)
    assert (m.m11, m.m12, m.m13) == (1.0, 0.0, 0.0)
    assert (m.m21, m.m22, m.m23) == (0.0, 1.0, 0.0)


def test_rotation_and_its_inverse_compose_to_identity():
    rng = np.random.default_rng(42)
    eye = np.eye(3)
    for _ in range(50):
        cx, cy = rng.uniform(-100, 100, size=2)
        theta = rng.uniform(-180, 180)
        a = np.vstack([rotation_matrix((cx, cy), theta).as_array(), [0, 0, 1]])
        b = np.vstack([rotation_matrix((cx, cy), -theta).as_array(), [0, 0, 1]])
        assert np.abs(a @ b - eye).max() < 1e-9


@given(st.tuples(coords, coords), angles)
def test_center_is_a_fixed_point(center, theta):
    m = rotation_matrix(center, theta)
    fx, fy = transform_point(m, center)
    assert math.isclose(fx, center[0], abs_tol=1e-9)
    assert math.isclose(fy, center[1], abs_tol=1e-9)


def test_ninety_degrees_about_origin_matches_hand_derivation():
    m = rotation_matrix((0.0, 0.0), 90.0).as_array()
    np.testing.assert_allclose(m, [[0, 1, 0], [-1, 0, 0]], atol=1e-12)


def test_rotation_preserves_distances():
    m = rotation_matrix((5.0, 5.0), 33.0)
    p1 = transform_point(m, (0.0, 0.0))
    p2 = transform_point(m, (3.0, 4.0))
    assert math.hypot(p1[0] - p2[0], p1[1] - p2[1]) == pytest.approx(5.0)


def test_nonpositive_scale_rejected():
    with pytest.raises(ValueError):
        rotation_matrix((0, 0), 10.0, scale=0.0)


@given(st.tuples(coords, coords), angles, st.tuples(coords, coords))
def test_invert_affine_round_trips_points(center, theta, p):
    m = rotation_matrix(center, theta)
    q = transform_point(invert_affine(m), transform_point(m, p))
    assert math.isclose(q[0], p[0], abs_tol=1e-6)
    assert math.isclose(q[1], p[1], abs_tol=1e-6)


def test_invert_singular_matrix_raises():
    with pytest.raises(SingularMatrixError):
        invert_affine(AffineMatrix(1, 2, 0, 2, 4, 0))


# -- eye angle and leveling --------------------------------------------


def test_eye_angle_sign_convention():
    level = EyePair(left=(10.0, 5.0), right=(0.0, 5.0))
    assert eye_angle(level) == 0.0
    lower_left = EyePair(left=(10.0, 8.0), right=(0.0, 5.0))
    assert eye_angle(lower_left) > 0
    assert eye_angle(EyePair(left=(10.0, 15.0), right=(0.0, 5.0))) == pytest.approx(45.0)


def test_eye_leveling_zeroes_the_angle_for_1000_random_pairs():
    """Rotating by the measured tilt levels the eye line to within 1e-9 deg."""
    rng = np.random.default_rng(77)
    for _ in range(1000):
        cx, cy = rng.uniform(50, 250, size=2)
        half = rng.uniform(5, 80)
        theta = rng.uniform(-45, 45)
        c, s = math.cos(math.radians(theta)), math.sin(math.radians(theta))
        right = (cx - half * c, cy - half * s)
        left = (cx + half * c, cy + half * s)
        pair = EyePair(left=left, right=right)
        assert eye_angle(pair) == pytest.approx(theta, abs=1e-9)
        m = rotation_matrix((cx, cy), eye_angle(pair))
        leveled = EyePair(
            left=transform_point(m, pair.left), right=transform_point(m, pair.right)
        )
        assert abs(eye_angle(leveled)) < 1e-9


def test_coincident_eyes_rejected():
    with pytest.raises(DegenerateEyePairError):
        EyePair(left=(4.0, 4.0), right=(4.0, 4.0))


def test_interocular_and_midpoint():
    pair = EyePair(left=(7.0, 9.0), right=(4.0, 5.0))
    assert pair.interocular == pytest.approx(5.0)
    assert pair.midpoint == (5.5, 7.0)


# -- warping -----------------------------------------------------------


def test_warp_identity_reproduces_the_image():
    rng = np.random.default_rng(13)
    pixels = rng.integers(0, 256, size=(20, 30), dtype=np.uint8)
    out = warp_affine(GrayImage(pixels), rotation_matrix((5, 5), 0.0), 30, 20)
    np.testing.assert_array_equal(out.pixels, pixels)


def test_warp_90_degrees_equals_index_permutation():
    """Center rotation by 90 deg is an exact grid permutation of a square."""
    rng = np.random.default_rng(99)
    pixels = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
    m = rotation_matrix((31.5, 31.5), 90.0)
    out = warp_affine(GrayImage(pixels), m, 64, 64).pixels
    # positive angles turn the raster counter-clockwise on screen, which
    # for dst[i, j] = src[j, N-1-i] is numpy's rot90 with k=1
    expected = np.rot90(pixels, k=1)
    assert np.abs(out.astype(int) - expected.astype(int)).max() <= 1


def test_warp_small_angle_keeps_interior_energy():
    """A 5-degree rotation of a bright centered disc keeps its mean brightness."""
    yy, xx = np.mgrid[0:60, 0:60]
    disc = ((xx - 30) ** 2 + (yy - 30) ** 2 <= 15**2).astype(np.uint8) * 200
    m = rotation_matrix((29.5, 29.5), 5.0)
    out = warp_affine(GrayImage(disc), m, 60, 60).pixels
    assert abs(int(out.sum()) - int(disc.sum())) / disc.sum() < 0.02


def test_warp_out_of_frame_samples_are_black():
    img = GrayImage(np.full((10, 10), 255, dtype=np.uint8))
    shift = AffineMatrix(1, 0, 8.0, 0, 1, 0)  # content moves 8 px right
    out = warp_affine(img, shift, 10, 10).pixels
    assert (out[:, 8:] == 255).all()
    assert (out[:, :8] == 0).all()


def test_warp_rejects_empty_output():
    img = GrayImage(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        warp_affine(img, rotation_matrix((0, 0), 0.0), 0, 4)


# -- crop geometry -----------------------------------------------------


def test_crop_box_above_convention_hand_values():
    pair = EyePair(left=(92.0, 50.0), right=(32.0, 50.0))  # d = 60
    box = face_crop_box(pair, "above")
    assert box == CropBox(x=2.0, y=2.0, width=120.0, height=141.0)


def test_crop_box_paper_literal_convention_offsets_downward():
    pair = EyePair(left=(92.0, 50.0), right=(32.0, 50.0))
    box = face_crop_box(pair, "paper-literal")
    assert box == CropBox(x=2.0, y=98.0, width=120.0, height=141.0)


def test_crop_box_unknown_convention_rejected():
    pair = EyePair(left=(92.0, 50.0), right=(32.0, 50.0))
    with pytest.raises(ValueError):
        face_crop_box(pair, "sideways")


def test_crop_box_uses_mean_eye_height():
    pair = EyePair(left=(90.0, 60.0), right=(30.0, 40.0))
    box = face_crop_box(pair, "above")
    d = pair.interocular
    assert box.y == pytest.approx(50.0 - 0.8 * d)


@given(st.floats(10, 100), st.tuples(coords, coords))
def test_crop_box_dimensions_scale_with_interocular(d, center):
    cx, cy = center
    pair = EyePair(left=(cx + d / 2, cy), right=(cx - d / 2, cy))
    box = face_crop_box(pair)
    assert box.width == pytest.approx(2.0 * d)
    assert box.height == pytest.approx(2.35 * d)


def test_snap_crop_box_floors_origin_and_rounds_dims():
    r = snap_crop_box(CropBox(2.7, 3.2, 10.4, 9.6), 100, 100)
    assert r == Rect(2, 3, 10, 10)


def test_snap_crop_box_small_clamp_is_tolerated():
    # 10 wide starting at -1: loses 1 px (10%), inside the 15% allowance
    r = snap_crop_box(CropBox(-1.0, 0.0, 10.0, 10.0), 100, 100)
    assert r == Rect(0, 0, 9, 10)


def test_snap_crop_box_excessive_clamp_returns_none():
    # loses 3 px of 10 (30% > 15%)
    assert snap_crop_box(CropBox(-3.0, 0.0, 10.0, 10.0), 100, 100) is None


def test_snap_crop_box_fully_outside_returns_none():
    assert snap_crop_box(CropBox(200.0, 0.0, 10.0, 10.0), 100, 100) is None
    assert snap_crop_box(CropBox(0.0, 0.0, 0.4, 10.0), 100, 100) is None


@settings(max_examples=200)
@given(
    st.floats(-20, 120),
    st.floats(-20, 120),
    st.floats(1, 60),
    st.floats(1, 60),
)
def test_snap_crop_box_result_always_fits_the_image(x, y, w, h):
    r = snap_crop_box(CropBox(x, y, w, h), 100, 80)
    if r is not None:
        assert r.fits_in(100, 80)
        assert r.w >= 1 and r.h >= 1
