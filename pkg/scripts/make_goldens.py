#!/usr/bin/env python3
"""Record reference detections for the golden fixtures.

Runs OpenCV's cascade runtime (an independent implementation of the same
published cascade models we ship) over a fixed subset of the image
fixtures and freezes its face box and eye centers into
tests/goldens/detections.jsonl.  The test suite then checks our detector
against these numbers: face boxes must overlap at IoU >= 0.6 and eye
centers must land within 3 px, which is the level of agreement one can
expect between two implementations that make different rounding and
scanning choices.

This script is meant to be run once, from a throwaway environment with
opencv-python==4.10.* installed (the library itself never depends on
OpenCV); the JSONL output is committed.  Re-run it only after
regenerating fixtures with make_fixtures.py.

Usage: python scripts/make_goldens.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

try:
    import cv2
except ImportError:
    sys.exit("make_goldens.py must run in an environment with opencv-python installed")

REPO_ROOT = Path(__file__).resolve().parent.parent
IMAGES = REPO_ROOT / "tests" / "fixtures" / "images"
OUT = REPO_ROOT / "tests" / "goldens" / "detections.jsonl"

GOLDEN_FILES = [
    "portrait_a.pgm",
    "portrait_b.pgm",
    "portrait_c.pgm",
    "portrait_d.png",
    "portrait_e.ppm",
    "portrait_tilt_up.pgm",
    "portrait_tilt_down.pgm",
    "astronaut_head.png",
]

FACE_PARAMS = dict(scaleFactor=1.1, minNeighbors=5)
EYE_PARAMS = dict(scaleFactor=1.05, minNeighbors=3)


def main() -> None:
    data_dir = Path(cv2.data.haarcascades)
    face_cascade = cv2.CascadeClassifier(str(data_dir / "haarcascade_frontalface_default.xml"))
    eye_cascade = cv2.CascadeClassifier(str(data_dir / "haarcascade_eye.xml"))
    if face_cascade.empty() or eye_cascade.empty():
        sys.exit("could not load the bundled cascade files")

    records = []
    for name in GOLDEN_FILES:
        gray = cv2.imread(str(IMAGES / name), cv2.IMREAD_GRAYSCALE)
        if gray is None:
            sys.exit(f"cannot read fixture {name}; run make_fixtures.py first")
        faces, face_counts = face_cascade.detectMultiScale2(gray, **FACE_PARAMS)
        if len(faces) == 0:
            sys.exit(f"reference found no face in {name}")
        # largest box, like the pipeline
        fx, fy, fw, fh = max(faces.tolist(), key=lambda r: r[2] * r[3])
        roi = gray[fy : fy + fh, fx : fx + fw]
        eyes, counts = eye_cascade.detectMultiScale2(roi, **EYE_PARAMS)
        if len(eyes) < 2:
            sys.exit(f"reference found {len(eyes)} eye boxes in {name}")
        ranked = sorted(
            zip(eyes.tolist(), counts.tolist()),
            key=lambda t: (-t[1], -t[0][2] * t[0][3], t[0][0]),
        )[:2]
        centers = sorted(
            ((fx + ex + ew / 2.0, fy + ey + eh / 2.0) for (ex, ey, ew, eh), _ in ranked),
            key=lambda c: -c[0],
        )
        records.append(
            {
                "file": name,
                "face": [int(fx), int(fy), int(fw), int(fh)],
                "eyes": [[float(c[0]), float(c[1])] for c in centers],
                "tool": f"opencv-{cv2.__version__}",
                "face_params": FACE_PARAMS,
                "eye_params": EYE_PARAMS,
            }
        )
        print(f"{name:24s} face=({fx},{fy},{fw},{fh}) eyes={centers}")

    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    print(f"wrote {len(records)} records to {OUT}")


if __name__ == "__main__":
    main()
