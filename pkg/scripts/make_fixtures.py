#!/usr/bin/env python3
"""Generate the deterministic image fixtures used by the test suite.

Writes synthetic portrait renders (plus two photographic frames derived
from scikit-image's astronaut sample) into tests/fixtures/images/ and a
fixtures.json manifest describing each file: the processing outcome the
pipeline is expected to produce for it, and - where the render makes them
knowable - the true eye centers.

The renders are procedural mugshots: an ellipse head over a dark
background with brows, sclera/iris/pupil eyes, nose and mouth shading,
smoothed so the stock cascade files respond to them the way they respond
to photographs.  Every portrait is seeded, so regenerating the fixtures
reproduces the same bytes.

After writing the files the script re-runs the detector over them and
asserts that each fixture still behaves as its manifest entry claims
(faces found where expected, eye centers near truth, rotation round trip
still detectable), so a renderer tweak that silently breaks an
expectation fails here rather than in the test suite.

Usage: python scripts/make_fixtures.py [--out DIR]
Requires scikit-image (for the astronaut sample) on top of the package
dependencies.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from facepipe.align import eye_angle, rotation_matrix, warp_affine
from facepipe.detect import detect_eyes_with_retry, detect_face
from facepipe.image import GrayImage, Rect, RgbImage, crop, to_grayscale
from facepipe.image_io import save_image

REPO_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_OUT = REPO_ROOT / "tests" / "fixtures"


def _gauss_kernel(sigma: float) -> np.ndarray:
    r = max(1, int(np.ceil(3.0 * sigma)))
    t = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect padding (float in, float out)."""
    if sigma <= 0:
        return img
    k = _gauss_kernel(sigma)
    r = len(k) // 2
    pad = np.pad(img, ((r, r), (0, 0)), mode="reflect")
    out = np.apply_along_axis(lambda c: np.convolve(c, k, mode="valid"), 0, pad)
    pad = np.pad(out, ((0, 0), (r, r)), mode="reflect")
    return np.apply_along_axis(lambda c: np.convolve(c, k, mode="valid"), 1, pad)


def render_portrait(
    width: int = 320,
    height: int = 380,
    cx: float | None = None,
    cy: float | None = None,
    face_w: float = 165.0,
    seed: int = 0,
    eye_frac: float = 0.42,
    bg: float = 140.0,
    blur: float = 2.2,
    tilt_deg: float = 0.0,
    eye_style: str = "open",
    eye_dy: float = 0.0,
) -> tuple[np.ndarray, list[tuple[float, float]]]:
    """Procedural grayscale mugshot.

    face_w is the head-ellipse width in pixels; eye_frac the interocular
    distance as a fraction of face_w; tilt_deg rotates the whole head
    about its center; eye_dy raises one eye and lowers the other (for an
    implausibly tilted eye line on an upright head); eye_style is
    "open", "closed" (lid lines instead of eyeballs) or "shades" (one
    dark band across both eyes).

    Returns the uint8 image and the true eye centers in image
    coordinates (left-to-right order not guaranteed).
    """
    rng = np.random.default_rng(seed)
    cx = width / 2 if cx is None else cx
    cy = height * 0.45 if cy is None else cy
    aw, ah = face_w / 2, face_w * 0.68
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    th = np.deg2rad(tilt_deg)
    ct, st = np.cos(th), np.sin(th)
    # head-local frame: u to the image right, v down, rotated by tilt_deg
    u = ct * (xx - cx) + st * (yy - cy)
    v = -st * (xx - cx) + ct * (yy - cy)

    img = np.full((height, width), float(bg))
    # torso and neck
    img[((v - ah * 1.45) / (ah * 1.4)) ** 2 + (u / (aw * 2.4)) ** 2 <= 1.0] = 120
    img[(np.abs(u) <= aw * 0.42) & (v > ah * 0.7) & (v < ah * 1.5)] = 165

    face_r = (u / aw) ** 2 + (v / ah) ** 2
    face = face_r <= 1.0
    shade = np.where(face, 182 - 26 * np.clip(face_r, 0, 1), 0)
    img[face] = shade[face]
    fore = face & (v < -ah * 0.30)
    img[fore] = np.minimum(img[fore] + 10, 200)
    hair = ((u / (aw * 1.08)) ** 2 + ((v + ah * 0.18) / (ah * 0.95)) ** 2 <= 1.0) & (
        v < -ah * 0.50
    )
    img[hair] = 60

    ex_off = aw * 2 * eye_frac / 2
    ev = -ah * 0.18
    eyes = []
    for sgn in (-1, 1):
        eu = sgn * ex_off
        ev_s = ev + sgn * eye_dy
        sock = ((u - eu) / (face_w * 0.16)) ** 2 + ((v - ev_s) / (face_w * 0.11)) ** 2 <= 1.0
        img[sock] -= 34
        brow = (np.abs(v - (ev_s - face_w * 0.15)) <= face_w * 0.030) & (
            np.abs(u - eu) <= face_w * 0.14
        )
        img[brow] = 75
        if eye_style == "open":
            sml = ((u - eu) / (face_w * 0.105)) ** 2 + ((v - ev_s) / (face_w * 0.062)) ** 2 <= 1.0
            img[sml] = 225
            iris = (u - eu) ** 2 + (v - ev_s) ** 2 <= (face_w * 0.050) ** 2
            img[iris] = 90
            pup = (u - eu) ** 2 + (v - ev_s) ** 2 <= (face_w * 0.022) ** 2
            img[pup] = 20
        elif eye_style == "closed":
            lid = (np.abs(v - ev_s) <= face_w * 0.012) & (np.abs(u - eu) <= face_w * 0.10)
            img[lid] = 90
        eyes.append((cx + ct * eu - st * ev_s, cy + st * eu + ct * ev_s))
    if eye_style == "shades":
        band = (np.abs(v - ev) <= face_w * 0.085) & (np.abs(u) <= face_w * 0.34)
        img[band] = 35
    for sgn in (-1, 1):
        chk = ((u - sgn * aw * 0.45) / (face_w * 0.13)) ** 2 + (
            (v - (ev + face_w * 0.30)) / (face_w * 0.12)
        ) ** 2 <= 1.0
        img[chk] += 14
    nose = (np.abs(u) <= face_w * 0.035) & (v > ev + face_w * 0.05) & (v < ev + face_w * 0.30)
    img[nose] += 12
    nsh = (np.abs(u + face_w * 0.06) <= face_w * 0.022) & (v > ev + face_w * 0.12) & (
        v < ev + face_w * 0.33
    )
    img[nsh] -= 18
    nost = (np.abs(v - (ev + face_w * 0.34)) <= face_w * 0.020) & (np.abs(u) <= face_w * 0.055)
    img[nost] = 125
    mouth = (np.abs(v - (ev + face_w * 0.54)) <= face_w * 0.030) & (np.abs(u) <= face_w * 0.15)
    img[mouth] = 92
    chin = face & (v > ah * 0.78)
    img[chin] -= 15

    img += gaussian_blur(rng.normal(0, 9.0, img.shape), 3.0)
    img = gaussian_blur(img, blur)
    img += rng.normal(0, 1.5, img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8), eyes


# file name -> (expected outcome, eye tolerance px or None, render kwargs)
PORTRAITS: dict[str, tuple[str, float | None, dict]] = {
    "portrait_a.pgm": ("ok", 3.0, dict(width=340, height=400, face_w=165, eye_frac=0.45, seed=1)),
    "portrait_b.pgm": ("ok", 3.0, dict(face_w=150, eye_frac=0.46, seed=2, cx=140)),
    "portrait_c.pgm": ("ok", 3.0, dict(width=300, height=360, face_w=170, seed=3)),
    "portrait_d.png": ("ok", 3.0, dict(face_w=185, seed=4)),
    "portrait_e.ppm": ("ok", 3.0, dict(face_w=160, eye_frac=0.44, seed=5, cx=178)),
    "portrait_tilt_up.pgm": (
        "ok",
        4.5,
        dict(width=360, height=420, face_w=165, eye_frac=0.45, seed=6, tilt_deg=6),
    ),
    "portrait_tilt_down.pgm": (
        "ok",
        4.5,
        dict(width=360, height=420, face_w=165, eye_frac=0.45, seed=7, tilt_deg=-6),
    ),
    # closed eyes: the detector locks onto brows/lids on the upright frame
    # (third schedule step), then cannot re-find them on the rotated frame
    "portrait_lidded.pgm": ("enf_r", None, dict(face_w=165, seed=11, eye_style="closed")),
    "portrait_narrow_eyes.pgm": ("enf", None, dict(face_w=165, eye_frac=0.33, seed=19)),
    "portrait_skew_eyes.pgm": (
        "enf",
        None,
        dict(width=340, height=400, face_w=165, eye_frac=0.45, seed=20, eye_dy=12),
    ),
    "portrait_steep_tilt.pgm": ("fnf", None, dict(face_w=165, seed=8, tilt_deg=25)),
}

ASTRONAUT_HEAD_BOX = Rect(124, 5, 200, 320)


def make_negatives(images_dir: Path) -> list[dict]:
    entries = []
    yy, xx = np.mgrid[0:300, 0:360].astype(np.float64)
    ramp = np.clip(0.45 * xx + 0.25 * yy, 0, 255).astype(np.uint8)
    save_image(GrayImage(ramp), images_dir / "gradient.pgm")
    entries.append({"file": "gradient.pgm", "expected": "fnf", "true_eyes": None})

    rng = np.random.default_rng(42)
    noise = rng.integers(0, 256, size=(300, 300), dtype=np.uint8)
    save_image(GrayImage(noise), images_dir / "noise.pgm")
    entries.append({"file": "noise.pgm", "expected": "fnf", "true_eyes": None})

    checker = (np.indices((16, 16)).sum(axis=0) % 2 * 255).astype(np.uint8)
    save_image(GrayImage(checker), images_dir / "tiny.pgm")
    entries.append({"file": "tiny.pgm", "expected": "fnf", "true_eyes": None})

    # valid header, raster cut short
    (images_dir / "corrupt.pgm").write_bytes(b"P5\n120 140\n255\n" + bytes(1000))
    entries.append({"file": "corrupt.pgm", "expected": "failed", "true_eyes": None})
    return entries


def make_astronauts(images_dir: Path) -> list[dict]:
    try:
        from skimage import data
    except ImportError:  # pragma: no cover - generation-time dependency only
        sys.exit("scikit-image is required to generate the photographic fixtures")
    rgb = RgbImage(data.astronaut())
    save_image(rgb, images_dir / "astronaut.png")
    head = crop(to_grayscale(rgb), ASTRONAUT_HEAD_BOX)
    save_image(head, images_dir / "astronaut_head.png")
    return [
        # full frame: the face is a small part of it, so the eye pair is
        # closer together than a fifth of the width and gets rejected
        {"file": "astronaut.png", "expected": "enf", "true_eyes": None},
        {"file": "astronaut_head.png", "expected": "ok", "true_eyes": None},
    ]


def verify(images_dir: Path, entries: list[dict]) -> None:
    """Re-run detection on every written fixture and check the manifest."""
    from facepipe.image_io import load_image

    failures = []
    for entry in entries:
        name = entry["file"]
        if entry["expected"] == "failed":
            continue
        img = load_image(images_dir / name)
        if isinstance(img, RgbImage):
            img = to_grayscale(img)
        face = detect_face(img)
        if entry["expected"] == "fnf":
            status = "ok" if face is None else f"UNEXPECTED face {face}"
        elif face is None:
            status = "NO FACE"
        else:
            outcome = detect_eyes_with_retry(img, face)
            if entry["expected"] == "enf":
                status = "ok(reject)" if outcome.pair is None else "UNEXPECTED valid pair"
            elif outcome.pair is None:
                status = "NO VALID EYES"
            else:
                status = f"ok att={outcome.attempts}"
                tol = entry.get("eye_tol_px")
                if tol is not None and entry["true_eyes"]:
                    truth = sorted(entry["true_eyes"], key=lambda p: -p[0])
                    got = [outcome.pair.left, outcome.pair.right]
                    err = max(
                        abs(g[i] - t[i]) for g, t in zip(got, truth) for i in (0, 1)
                    )
                    status += f" err={err:.1f}px"
                    if err > tol:
                        status += " TOO FAR"
                # an "ok" fixture must stay detectable on the rotated
                # frame or the re-detecting mode would route it to a
                # failure bucket; an "enf_r" fixture must not
                angle = eye_angle(outcome.pair)
                center = ((img.width - 1) / 2.0, (img.height - 1) / 2.0)
                rot = warp_affine(img, rotation_matrix(center, angle), img.width, img.height)
                face_r = detect_face(rot)
                redetected = False
                if face_r is not None:
                    redetected = detect_eyes_with_retry(rot, face_r).pair is not None
                if entry["expected"] == "enf_r":
                    status += "(reject)" if not redetected else " UNEXPECTED rotated redetect"
                elif not redetected:
                    status += " LOST AFTER ROTATION"
        bad = any(k in status for k in ("UNEXPECTED", "NO ", "TOO FAR", "LOST"))
        if bad:
            failures.append(name)
        print(f"  {name:26s} expected={entry['expected']:6s} {status}")
    if failures:
        sys.exit(f"fixture verification failed: {failures}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()

    images_dir = args.out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    entries: list[dict] = []
    for name, (expected, eye_tol, kw) in PORTRAITS.items():
        pixels, eyes = render_portrait(**kw)
        if name.endswith(".ppm"):
            save_image(RgbImage(np.repeat(pixels[:, :, None], 3, axis=2)), images_dir / name)
        else:
            save_image(GrayImage(pixels), images_dir / name)
        entries.append(
            {
                "file": name,
                "expected": expected,
                # recorded even for expected-failure renders: manual-annotation
                # tests click these positions
                "true_eyes": [list(p) for p in eyes],
                "eye_tol_px": eye_tol,
                "render": kw,
            }
        )
    entries.extend(make_astronauts(images_dir))
    entries.extend(make_negatives(images_dir))

    manifest_path = args.out / "fixtures.json"
    manifest_path.write_text(json.dumps(entries, indent=2) + "\n")
    print(f"wrote {len(entries)} fixtures to {images_dir}")
    print("verifying:")
    verify(images_dir, entries)
    print(f"manifest: {manifest_path}")


if __name__ == "__main__":
    main()
