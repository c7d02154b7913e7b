"""Rectangle grouping, eye geometry rules, and detector agreement with
reference goldens recorded from an independent toolchain."""

import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facepipe.detect import (
    DEFAULT_EYE_SCHEDULE,
    MAX_EYE_TILT_DEG,
    MIN_INTEROCULAR_FRACTION,
    DetectParams,
    RejectReason,
    default_face_model,
    detect_eyes,
    detect_eyes_with_retry,
    detect_face,
    detect_multi_scale,
    detect_multi_scale_with_neighbors,
    eye_centers,
    group_rectangles,
    order_eyes,
    validate_eye_pair,
)
from facepipe.errors import DegenerateEyePairError
from facepipe.image import GrayImage, Rect, to_grayscale
from facepipe.image_io import load_image

IMAGE_ROOT = Path(__file__).parent / "fixtures" / "images"


def load_gray(name: str) -> GrayImage:
    img = load_image(IMAGE_ROOT / name)
    return img if isinstance(img, GrayImage) else to_grayscale(img)

rect_strategy = st.builds(
    Rect,
    st.integers(0, 200),
    st.integers(0, 200),
    st.integers(1, 100),
    st.integers(1, 100),
)


# -- rectangle grouping ------------------------------------------------


def test_group_empty_input():
    assert group_rectangles([], 3) == []


def test_group_min_neighbors_zero_returns_raw_candidates():
    rects = [Rect(0, 0, 10, 10), Rect(50, 50, 10, 10), Rect(0, 0, 10, 10)]
    assert group_rectangles(rects, 0) == rects


def test_group_threshold_is_strictly_greater_than():
    """A cluster of exactly n members survives min_neighbors=n-1, not n."""
    cluster = [Rect(100 + i, 100, 50, 50) for i in range(5)]
    assert group_rectangles(cluster, 5) == []
    survivors = group_rectangles(cluster, 4)
    assert len(survivors) == 1
    assert survivors[0] == Rect(102, 100, 50, 50)  # rint of the average


def test_group_keeps_separated_clusters_apart():
    near = [Rect(10, 10, 40, 40), Rect(12, 11, 41, 40), Rect(9, 12, 40, 41)]
    far = [Rect(300, 300, 40, 40), Rect(302, 298, 40, 40), Rect(298, 301, 41, 41)]
    got = group_rectangles(near + far, 2)
    assert len(got) == 2
    assert any(r.x < 100 for r in got) and any(r.x > 250 for r in got)


def test_group_dissimilar_sizes_do_not_merge():
    rects = [Rect(10, 10, 20, 20)] * 3 + [Rect(200, 200, 80, 80)] * 3
    got = group_rectangles(rects, 2)
    assert len(got) == 2


def test_group_suppresses_average_contained_in_larger_accepted_rect():
    # the small cluster's average sits inside the big cluster's average,
    # so only the enclosing rectangle survives
    rects = [Rect(30, 30, 20, 20)] * 3 + [Rect(10, 10, 80, 80)] * 3
    got = group_rectangles(rects, 2)
    assert got == [Rect(10, 10, 80, 80)]


def test_group_counts_report_cluster_sizes():
    from facepipe.detect import _group_with_neighbors

    cluster = [Rect(10, 10, 40, 40)] * 4 + [Rect(200, 200, 40, 40)] * 2
    got = dict()
    for rect, count in _group_with_neighbors(cluster, 1):
        got[(rect.x, rect.y)] = count
    assert got == {(10, 10): 4, (200, 200): 2}


@settings(max_examples=100)
@given(st.lists(rect_strategy, max_size=30), st.integers(0, 5))
def test_group_never_invents_rectangles(rects, mn):
    got = group_rectangles(rects, mn)
    assert len(got) <= len(rects)
    if rects:
        max_r = max(r.right for r in rects)
        max_b = max(r.bottom for r in rects)
        for g in got:
            assert 0 <= g.x <= max_r and 0 <= g.y <= max_b
            assert g.right <= max_r + 1 and g.bottom <= max_b + 1


@given(st.lists(rect_strategy, min_size=1, max_size=15))
def test_group_is_permutation_invariant(rects):
    mn = 1
    a = {(r.x, r.y, r.w, r.h) for r in group_rectangles(rects, mn)}
    b = {(r.x, r.y, r.w, r.h) for r in group_rectangles(list(reversed(rects)), mn)}
    assert a == b


def test_detector_grouping_matches_post_hoc_grouping():
    """detect(mn=k) equals grouping the raw mn=0 candidates with k."""
    img = load_image(IMAGE_ROOT / "portrait_a.pgm")
    model = default_face_model()
    raw = detect_multi_scale(model, img, DetectParams(scale_factor=1.2, min_neighbors=0))
    direct = detect_multi_scale(model, img, DetectParams(scale_factor=1.2, min_neighbors=5))
    regrouped = group_rectangles(raw, 5)
    regrouped.sort(key=lambda r: (-r.area, r.x, r.y, r.w))
    assert direct == regrouped


# -- eye ordering and validation ---------------------------------------


def test_order_eyes_left_has_larger_x():
    pair = order_eyes((10.0, 50.0), (90.0, 52.0))
    assert pair.left == (90.0, 52.0)
    assert pair.right == (10.0, 50.0)
    swapped = order_eyes((90.0, 52.0), (10.0, 50.0))
    assert swapped == pair


def test_order_eyes_tie_breaks_on_y():
    pair = order_eyes((50.0, 10.0), (50.0, 30.0))
    assert pair.left == (50.0, 30.0)


def test_order_eyes_coincident_rejected():
    with pytest.raises(DegenerateEyePairError):
        order_eyes((5.0, 5.0), (5.0, 5.0))


def test_eye_centers_are_box_centers():
    a, b = eye_centers(Rect(10, 20, 30, 40), Rect(0, 0, 5, 5))
    assert a == (25.0, 40.0)
    assert b == (2.5, 2.5)


def angled_pair(theta_deg: float, d: float = 120.0, cx: float = 150.0, cy: float = 100.0):
    """Eye pair with the given tilt; d is generous so only the angle rule bites."""
    t = math.radians(theta_deg)
    half = d / 2.0
    return order_eyes(
        (cx - half * math.cos(t), cy - half * math.sin(t)),
        (cx + half * math.cos(t), cy + half * math.sin(t)),
    )


@pytest.mark.parametrize("theta", [14.9, -14.9, 0.0])
def test_validate_accepts_tilt_up_to_fifteen_degrees(theta):
    assert validate_eye_pair(angled_pair(theta), image_width=300) is None


@pytest.mark.parametrize("theta", [15.1, -15.1, 44.0])
def test_validate_rejects_tilt_beyond_fifteen_degrees(theta):
    assert validate_eye_pair(angled_pair(theta), image_width=300) is RejectReason.ANGLE


def test_validate_interocular_threshold_sides():
    w = 1000
    too_close = angled_pair(0.0, d=0.199 * w)
    assert validate_eye_pair(too_close, image_width=w) is RejectReason.INTEROCULAR
    wide_enough = angled_pair(0.0, d=0.201 * w)
    assert validate_eye_pair(wide_enough, image_width=w) is None
    exactly_fifth = angled_pair(0.0, d=0.2 * w)
    assert validate_eye_pair(exactly_fifth, image_width=w) is None  # strictly-less rule


def test_validate_checks_angle_before_interocular():
    # both rules violated: the angle verdict must win
    narrow_and_tilted = angled_pair(30.0, d=10.0)
    assert validate_eye_pair(narrow_and_tilted, image_width=1000) is RejectReason.ANGLE


def test_threshold_constants_are_pinned():
    assert MAX_EYE_TILT_DEG == 15.0
    assert MIN_INTEROCULAR_FRACTION == 0.2


# -- full detectors against recorded goldens ---------------------------


def test_face_boxes_match_reference_goldens(detection_goldens):
    for record in detection_goldens:
        face = detect_face(load_gray(record["file"]))
        gx, gy, gw, gh = record["face"]
        assert face is not None, record["file"]
        iou = face.iou(Rect(gx, gy, gw, gh))
        assert iou >= 0.6, f"{record['file']}: IoU {iou:.3f}"


def test_eye_centers_match_reference_goldens(detection_goldens):
    for record in detection_goldens:
        img = load_gray(record["file"])
        face = detect_face(img)
        pair = detect_eyes(img, face, DetectParams(scale_factor=1.05, min_neighbors=3))
        assert pair is not None, record["file"]
        golden = sorted(record["eyes"], key=lambda e: -e[0])  # subject-left first
        for got, want in zip((pair.left, pair.right), golden):
            dist = math.hypot(got[0] - want[0], got[1] - want[1])
            assert dist <= 3.0, f"{record['file']}: eye off by {dist:.2f} px"


def test_detect_face_returns_none_without_a_face():
    img = load_image(IMAGE_ROOT / "noise.pgm")
    assert detect_face(img) is None


def test_detect_face_returns_largest_hit():
    img = load_image(IMAGE_ROOT / "portrait_a.pgm")
    face = detect_face(img)
    all_hits = detect_multi_scale(default_face_model(), img, DetectParams(1.1, 5))
    assert face == all_hits[0]
    assert all(face.area >= r.area for r in all_hits)


# -- retry schedule ----------------------------------------------------


def test_retry_counts_attempts_across_schedule():
    img = load_image(IMAGE_ROOT / "portrait_a.pgm")
    face = detect_face(img)
    impossible = DetectParams(scale_factor=1.05, min_neighbors=3, min_size=10_000)
    schedule = (impossible, DetectParams(scale_factor=1.05, min_neighbors=3))
    outcome = detect_eyes_with_retry(img, face, schedule=schedule)
    assert outcome.ok
    assert outcome.attempts == 2


def test_retry_stops_at_first_success():
    img = load_image(IMAGE_ROOT / "portrait_a.pgm")
    face = detect_face(img)
    outcome = detect_eyes_with_retry(img, face, schedule=DEFAULT_EYE_SCHEDULE)
    assert outcome.ok and outcome.attempts == 1


def test_retry_empty_schedule_rejected():
    img = load_image(IMAGE_ROOT / "portrait_a.pgm")
    with pytest.raises(ValueError):
        detect_eyes_with_retry(img, Rect(0, 0, 50, 50), schedule=())


def test_retry_reports_failure_after_exhausting_schedule():
    img = load_image(IMAGE_ROOT / "noise.pgm")
    outcome = detect_eyes_with_retry(
        img, Rect(0, 0, 100, 100), schedule=(DetectParams(1.05, 3),)
    )
    assert not outcome.ok
    assert outcome.pair is None
    assert outcome.attempts == 1
