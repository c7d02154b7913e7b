"""Acceptance gate: one timed test per core behavioral guarantee.

Each test is self-contained — it performs all of its own work (including
any batch runs it needs) inside its own runtime budget, so a pass line
here certifies both the behavior and the cost of checking it.  Run with
``pytest -v tests/test_acceptance.py`` to get one pass/fail line per
guarantee.
"""

import json
import math
import shutil
import time
from collections import Counter
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from facepipe.align import (
    EyePair,
    eye_angle,
    rotation_matrix,
    transform_point,
    warp_affine,
)
from facepipe.detect import (
    DetectParams,
    RejectReason,
    detect_eyes,
    detect_face,
    validate_eye_pair,
)
from facepipe.image import GrayImage, Rect, RgbImage, integral, to_grayscale
from facepipe.image_io import load_image
from facepipe.pipeline import BUCKETS, PipelineConfig, list_input_images, run_batch

IMAGE_ROOT = Path(__file__).parent / "fixtures" / "images"
FIXTURE_META = Path(__file__).parent / "fixtures" / "fixtures.json"
GOLDEN_DETECTIONS = Path(__file__).parent / "goldens" / "detections.jsonl"


@contextmanager
def runtime_budget(seconds: float):
    """Fail the enclosing test if its body overruns the stated budget."""
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    print(f"  [runtime {elapsed:.2f}s / budget {seconds:g}s]")
    assert elapsed < seconds, f"took {elapsed:.2f}s, budget is {seconds:g}s"


def load_gray(name: str) -> GrayImage:
    img = load_image(IMAGE_ROOT / name)
    if isinstance(img, RgbImage):
        img = to_grayscale(img)
    return img


def expected_ok_fixtures() -> list[str]:
    meta = json.loads(FIXTURE_META.read_text())
    return [r["file"] for r in meta if r["expected"] == "ok"]


def test_grayscale_is_exact_on_a_full_channel_lattice():
    """Every stride-17 RGB triple converts to round(0.299R + 0.587G + 0.114B)."""
    with runtime_budget(5.0):
        vals = np.arange(0, 256, 17, dtype=np.int64)  # 16 values incl. 0 and 255
        r, g, b = np.meshgrid(vals, vals, vals, indexing="ij")
        rgb = np.stack([r, g, b], axis=-1).reshape(64, 64, 3).astype(np.uint8)
        expected = (
            np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5)
            .clip(0, 255)
            .astype(np.uint8)
            .reshape(64, 64)
        )
        got = to_grayscale(RgbImage(rgb)).pixels
        assert np.array_equal(got, expected)


def test_integral_tables_match_naive_double_loop_sums_exactly():
    """1000 random windows over 20 random images: sums and squared sums agree."""
    with runtime_budget(5.0):
        rng = np.random.default_rng(1234)
        checked = 0
        for _ in range(20):
            h = int(rng.integers(1, 65))
            w = int(rng.integers(1, 65))
            pixels = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
            table = integral(GrayImage(pixels), with_squares=True)
            for _ in range(50):
                x = int(rng.integers(0, w))
                y = int(rng.integers(0, h))
                rect = Rect(x, y, int(rng.integers(1, w - x + 1)), int(rng.integers(1, h - y + 1)))
                total = 0
                sq_total = 0
                for row in range(rect.y, rect.y + rect.h):
                    for col in range(rect.x, rect.x + rect.w):
                        v = int(pixels[row, col])
                        total += v
                        sq_total += v * v
                assert table.rect_sum(rect) == total
                assert table.rect_sq_sum(rect) == sq_total
                checked += 1
        assert checked == 1000


def test_detector_matches_frozen_reference_on_three_fixtures():
    """Face boxes reach IoU >= 0.6 and eye centers land within 3 px of the
    recorded reference detections."""
    with runtime_budget(60.0):
        goldens = {
            rec["file"]: rec
            for rec in (json.loads(line) for line in GOLDEN_DETECTIONS.read_text().splitlines())
        }
        for name in ("portrait_a.pgm", "portrait_c.pgm", "astronaut_head.png"):
            rec = goldens[name]
            img = load_gray(name)
            face = detect_face(img, DetectParams(scale_factor=1.1, min_neighbors=5))
            assert face is not None, name
            ref = Rect(*rec["face"])
            assert face.iou(ref) >= 0.6, (name, face, ref)
            pair = detect_eyes(img, face)
            assert pair is not None, name
            want_left, want_right = sorted(rec["eyes"], key=lambda p: -p[0])
            for got, want in ((pair.left, want_left), (pair.right, want_right)):
                assert abs(got[0] - want[0]) <= 3.0, (name, got, want)
                assert abs(got[1] - want[1]) <= 3.0, (name, got, want)


def test_rotation_matrix_identities():
    """Zero angle is the exact identity, opposite turns cancel to 1e-9, the
    center is a fixed point, and the quarter turn matches the hand-derived
    matrix."""
    with runtime_budget(1.0):
        zero = rotation_matrix((12.5, -4.0), 0.0).as_array()
        assert np.array_equal(zero, np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))

        identity3 = np.eye(3)
        rng = np.random.default_rng(99)
        for _ in range(100):
            cx, cy = (float(v) for v in rng.uniform(-500.0, 500.0, size=2))
            theta = float(rng.uniform(-180.0, 180.0))
            fwd = rotation_matrix((cx, cy), theta)
            fx, fy = transform_point(fwd, (cx, cy))
            assert fx == pytest.approx(cx, abs=1e-9)
            assert fy == pytest.approx(cy, abs=1e-9)
            back = rotation_matrix((cx, cy), -theta)
            prod = np.vstack([fwd.as_array(), [0.0, 0.0, 1.0]]) @ np.vstack(
                [back.as_array(), [0.0, 0.0, 1.0]]
            )
            assert np.abs(prod - identity3).max() < 1e-9

        quarter = rotation_matrix((0.0, 0.0), 90.0).as_array()
        assert np.allclose(quarter, [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]], atol=1e-12)


def test_leveling_rotation_zeroes_the_eye_angle_for_1000_pairs():
    """Rotating by the measured tilt levels any eye pair with |tilt| <= 45 deg
    to within 1e-9 degrees."""
    with runtime_budget(1.0):
        rng = np.random.default_rng(77)
        for _ in range(1000):
            cx, cy = (float(v) for v in rng.uniform(50.0, 250.0, size=2))
            half = float(rng.uniform(5.0, 80.0))
            theta = float(rng.uniform(-45.0, 45.0))
            c, s = math.cos(math.radians(theta)), math.sin(math.radians(theta))
            pair = EyePair(left=(cx + half * c, cy + half * s), right=(cx - half * c, cy - half * s))
            m = rotation_matrix((cx, cy), eye_angle(pair))
            leveled = EyePair(
                left=transform_point(m, pair.left), right=transform_point(m, pair.right)
            )
            assert abs(eye_angle(leveled)) < 1e-9


def test_validation_thresholds_sit_on_the_stated_sides():
    """Probe pairs at 14.9/15.1 degrees and 0.199/0.201 of the image width
    fall on the correct sides of the tilt and interocular rules."""
    with runtime_budget(1.0):

        def tilted(theta_deg: float, d: float = 120.0) -> EyePair:
            c = math.cos(math.radians(theta_deg))
            s = math.sin(math.radians(theta_deg))
            return EyePair(
                left=(150.0 + d / 2 * c, 100.0 + d / 2 * s),
                right=(150.0 - d / 2 * c, 100.0 - d / 2 * s),
            )

        def level(d: float) -> EyePair:
            return EyePair(left=(500.0 + d / 2, 300.0), right=(500.0 - d / 2, 300.0))

        # interocular 120 px in a 300 px image, so only the tilt rule can bite
        assert validate_eye_pair(tilted(14.9), 300) is None
        assert validate_eye_pair(tilted(-14.9), 300) is None
        assert validate_eye_pair(tilted(15.1), 300) is RejectReason.ANGLE
        assert validate_eye_pair(tilted(-15.1), 300) is RejectReason.ANGLE

        assert validate_eye_pair(level(199.0), 1000) is RejectReason.INTEROCULAR
        assert validate_eye_pair(level(201.0), 1000) is None


def test_modes_agree_wherever_both_succeed(tmp_path):
    """Re-detecting after rotation and transforming the original eye centers
    give crop boxes within 3 px per coordinate and chips within a mean
    absolute difference of 5 gray levels."""
    with runtime_budget(60.0):
        ok_names = expected_ok_fixtures()
        src = tmp_path / "in"
        src.mkdir()
        for name in ok_names:
            shutil.copyfile(IMAGE_ROOT / name, src / name)

        by_mode = {}
        for mode in ("faithful", "optimized"):
            config = PipelineConfig(run_root=tmp_path / mode, mode=mode)
            by_mode[mode] = {r.input: (config, r) for r in run_batch(src, config)}

        compared = 0
        for name in ok_names:
            cfg_f, res_f = by_mode["faithful"][name]
            cfg_o, res_o = by_mode["optimized"][name]
            assert res_f.ok and res_o.ok, (name, res_f.outcome, res_o.outcome)
            for a, b in zip(res_f.crop_box, res_o.crop_box):
                assert abs(a - b) <= 3, (name, res_f.crop_box, res_o.crop_box)
            chip_f = load_image(cfg_f.run_root / res_f.output).pixels.astype(np.int64)
            chip_o = load_image(cfg_o.run_root / res_o.output).pixels.astype(np.int64)
            assert chip_f.shape == chip_o.shape == (70, 60)
            mad = float(np.abs(chip_f - chip_o).mean())
            assert mad <= 5.0, (name, mad)
            compared += 1
        assert compared == len(ok_names)  # both modes succeeded everywhere expected


def test_batch_runs_are_shaped_conserved_and_parallel_deterministic(tmp_path):
    """Every success chip is exactly 60x70, successes plus bucket routings
    plus unreadable inputs account for every input file, and the manifest is
    byte-identical between serial and 8-way parallel runs."""
    with runtime_budget(120.0):
        runs = {}
        for jobs in (1, 8):
            config = PipelineConfig(run_root=tmp_path / f"run{jobs}")
            results = run_batch(IMAGE_ROOT, config, parallelism=jobs)
            runs[jobs] = (config, results)

        config1, results1 = runs[1]
        n_inputs = len(list_input_images(IMAGE_ROOT))
        assert len(results1) == n_inputs

        for res in results1:
            if res.ok:
                chip = load_image(config1.run_root / res.output)
                assert chip.pixels.shape == (70, 60), res.input

        # conservation, counted from the filesystem rather than the results
        out_files = len(list((config1.run_root / "out").iterdir()))
        bucket_files = sum(
            len(list((config1.run_root / b).iterdir()))
            for b in BUCKETS
            if (config1.run_root / b).is_dir()
        )
        unreadable = sum(1 for r in results1 if r.outcome == "failed")
        assert out_files + bucket_files + unreadable == n_inputs

        outcome_counts = Counter(r.outcome for r in results1)
        assert out_files == outcome_counts["ok"]

        manifest1 = (runs[1][0].run_root / "manifest.jsonl").read_bytes()
        manifest8 = (runs[8][0].run_root / "manifest.jsonl").read_bytes()
        assert manifest1 == manifest8


def test_quarter_turn_warp_matches_pure_index_permutation():
    """Warping a random 64x64 image by 90 degrees about its center agrees
    with numpy's lossless rot90 within 1 gray level per pixel."""
    with runtime_budget(1.0):
        rng = np.random.default_rng(2024)
        pixels = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
        m = rotation_matrix((31.5, 31.5), 90.0)
        out = warp_affine(GrayImage(pixels), m, 64, 64)
        expected = np.rot90(pixels, k=1)
        diff = np.abs(out.pixels.astype(np.int64) - expected.astype(np.int64))
        assert int(diff.max()) <= 1
