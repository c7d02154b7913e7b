"""Per-image orchestration and batch runs with failure routing.

Each image flows through six stages: grayscale, face detection, eye
detection with geometric validation, eye-line leveling rotation, either
re-detection on the rotated frame ("faithful" mode) or reuse of the
rotated original eye coordinates ("optimized" mode), and finally the
proportional crop resized to the output chip size.  The first stage that
gives up routes the image to a failure bucket folder (fnf, enf, fnf_r,
enf_r, resize_failed) where a human can pick it up later.

Batch runs write a manifest.jsonl whose content is a pure function of
inputs and configuration: records are keyed by basename, sorted, and
carry no wall-clock data, so manifests from runs at any parallelism are
byte-identical.  Per-stage wall times go to a timings.jsonl sidecar
instead.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .align import (
    EyePair,
    eye_angle,
    face_crop_box,
    rotation_matrix,
    snap_crop_box,
    transform_point,
    warp_affine,
)
from .detect import (
    DEFAULT_EYE_SCHEDULE,
    DEFAULT_FACE_PARAMS,
    DetectParams,
    detect_eyes_with_retry,
    detect_face,
    order_eyes,
)
from .errors import FacepipeError, ImageIOError
from .image import GrayImage, RgbImage, crop, resize_bilinear, to_grayscale
from .image_io import load_image, save_image

BUCKETS = ("fnf", "enf", "fnf_r", "enf_r", "resize_failed")
OUTPUT_DIR = "out"
MODES = ("faithful", "optimized")
CROP_Y_CONVENTIONS = ("above", "paper-literal")
OUTPUT_FORMATS = ("pgm", "png")

IMAGE_SUFFIXES = {".pgm", ".ppm", ".png", ".jpg", ".jpeg"}

Point = tuple[float, float]


@dataclass(frozen=True)
class PipelineConfig:
    """Everything that determines what a run produces.

    run_root is where outputs, bucket copies and the manifest land.
    crop_y_convention picks where the crop origin sits relative to the
    eye line: "above" places it 0.8 interocular distances above (the
    convention that actually frames a face), "paper-literal" places it
    below, following the formula as printed.
    """

    run_root: Path
    face_params: DetectParams = DEFAULT_FACE_PARAMS
    eye_schedule: tuple[DetectParams, ...] = DEFAULT_EYE_SCHEDULE
    mode: str = "faithful"
    out_size: tuple[int, int] = (60, 70)  # (width, height)
    crop_y_convention: str = "above"
    eye_upper_fraction: float | None = None
    output_format: str = "pgm"

    def __post_init__(self):
        object.__setattr__(self, "run_root", Path(self.run_root))
        object.__setattr__(self, "eye_schedule", tuple(self.eye_schedule))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.crop_y_convention not in CROP_Y_CONVENTIONS:
            raise ValueError(
                f"crop_y_convention must be one of {CROP_Y_CONVENTIONS}, "
                f"got {self.crop_y_convention!r}"
            )
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(
                f"output_format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}"
            )
        w, h = self.out_size
        if w <= 0 or h <= 0:
            raise ValueError(f"out_size must be positive, got {self.out_size}")
        if not self.eye_schedule:
            raise ValueError("eye_schedule must not be empty")

    @property
    def config_hash(self) -> str:
        """12-hex digest of the processing-relevant fields.

        run_root is excluded so the same corpus processed into two
        directories yields identical manifests.
        """
        payload = {
            "face_params": _params_dict(self.face_params),
            "eye_schedule": [_params_dict(p) for p in self.eye_schedule],
            "mode": self.mode,
            "out_size": list(self.out_size),
            "crop_y_convention": self.crop_y_convention,
            "eye_upper_fraction": self.eye_upper_fraction,
            "output_format": self.output_format,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _params_dict(p: DetectParams) -> dict:
    return {
        "scale_factor": p.scale_factor,
        "min_neighbors": p.min_neighbors,
        "min_size": p.min_size,
        "max_size": p.max_size,
    }


@dataclass
class PipelineResult:
    """Outcome plus the full stage trace for one image.

    outcome is "ok", one of BUCKETS, or "failed" (unreadable input).
    Coordinates are in the frame they were measured in: face/eyes on the
    original image, face_rotated/eyes_rotated on the leveled image.
    stage_ms carries wall times and never enters the manifest.
    """

    input: str
    outcome: str
    output: str | None = None  # path relative to run_root
    face: tuple[int, int, int, int] | None = None
    eyes: tuple[Point, Point] | None = None  # (subject-left, subject-right)
    eye_attempts: int = 0
    theta_deg: float | None = None
    face_rotated: tuple[int, int, int, int] | None = None
    eyes_rotated: tuple[Point, Point] | None = None
    post_angle_deg: float | None = None
    crop_box: tuple[int, int, int, int] | None = None
    mode: str = "faithful"
    config_hash: str = ""
    error: str | None = None
    stage_ms: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"

    @property
    def bucket(self) -> str | None:
        return self.outcome if self.outcome in BUCKETS else None

    def manifest_record(self) -> dict:
        """Deterministic manifest row (no wall-clock fields)."""
        return {
            "input": self.input,
            "outcome": self.outcome,
            "bucket": self.bucket,
            "output": self.output,
            "face": list(self.face) if self.face else None,
            "eyes": [list(p) for p in self.eyes] if self.eyes else None,
            "eye_attempts": self.eye_attempts,
            "theta_deg": self.theta_deg,
            "face_rotated": list(self.face_rotated) if self.face_rotated else None,
            "eyes_rotated": [list(p) for p in self.eyes_rotated] if self.eyes_rotated else None,
            "post_angle_deg": self.post_angle_deg,
            "crop_box": list(self.crop_box) if self.crop_box else None,
            "mode": self.mode,
            "config_hash": self.config_hash,
            "error": self.error,
        }


class _StageClock:
    def __init__(self):
        self.ms: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def lap(self, stage: str) -> None:
        t = time.perf_counter()
        self.ms[stage] = (t - self._t0) * 1000.0
        self._t0 = t


def _copy_to_bucket(path: Path, bucket: str, config: PipelineConfig) -> None:
    dest = config.run_root / bucket
    dest.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(path, dest / path.name)


def _save_chip(chip: GrayImage, stem: str, config: PipelineConfig) -> str:
    out_dir = config.run_root / OUTPUT_DIR
    out_dir.mkdir(parents=True, exist_ok=True)
    rel = f"{OUTPUT_DIR}/{stem}.{config.output_format}"
    save_image(chip, config.run_root / rel)
    return rel


def _rect_tuple(r) -> tuple[int, int, int, int]:
    return (r.x, r.y, r.w, r.h)


def _finish_crop(
    rotated: GrayImage,
    pair: EyePair,
    path: Path,
    result: PipelineResult,
    config: PipelineConfig,
    clock: _StageClock,
) -> PipelineResult:
    """Shared tail: crop box -> snap -> resize -> save, or resize_failed."""
    box = face_crop_box(pair, y_convention=config.crop_y_convention)
    snapped = snap_crop_box(box, rotated.width, rotated.height)
    if snapped is None:
        clock.lap("crop")
        result.outcome = "resize_failed"
        result.stage_ms = clock.ms
        _copy_to_bucket(path, "resize_failed", config)
        return result
    result.crop_box = _rect_tuple(snapped)
    out_w, out_h = config.out_size
    chip = resize_bilinear(crop(rotated, snapped), out_w, out_h)
    clock.lap("crop")
    result.output = _save_chip(chip, path.stem, config)
    result.outcome = "ok"
    clock.lap("save")
    result.stage_ms = clock.ms
    return result


def process_image(path: str | Path, config: PipelineConfig) -> PipelineResult:
    """Run the six stages on one image; never raises for a bad image.

    Every failure becomes a routed outcome: the original file is copied
    into the matching bucket folder and the result says which stage gave
    up.  Only configuration errors propagate as exceptions.
    """
    path = Path(path)
    result = PipelineResult(input=path.name, outcome="failed", mode=config.mode,
                            config_hash=config.config_hash)
    clock = _StageClock()

    def routed(bucket: str) -> PipelineResult:
        result.outcome = bucket
        result.stage_ms = clock.ms
        _copy_to_bucket(path, bucket, config)
        return result

    try:
        img = load_image(path)
    except FacepipeError as exc:
        clock.lap("load")
        result.error = str(exc).replace(str(path), path.name)
        result.stage_ms = clock.ms
        return result
    gray = to_grayscale(img) if isinstance(img, RgbImage) else img
    clock.lap("load")

    face = detect_face(gray, config.face_params)
    clock.lap("detect_face")
    if face is None:
        return routed("fnf")
    result.face = _rect_tuple(face)

    eyes_out = detect_eyes_with_retry(
        gray, face, config.eye_schedule, upper_fraction=config.eye_upper_fraction
    )
    result.eye_attempts = eyes_out.attempts
    clock.lap("detect_eyes")
    if eyes_out.pair is None:
        return routed("enf")
    pair = eyes_out.pair
    result.eyes = (pair.left, pair.right)

    theta = eye_angle(pair)
    result.theta_deg = theta
    center = ((gray.width - 1) / 2.0, (gray.height - 1) / 2.0)
    matrix = rotation_matrix(center, theta)
    rotated = warp_affine(gray, matrix, gray.width, gray.height)
    clock.lap("rotate")

    if config.mode == "faithful":
        face_r = detect_face(rotated, config.face_params)
        clock.lap("detect_face_rotated")
        if face_r is None:
            return routed("fnf_r")
        result.face_rotated = _rect_tuple(face_r)
        eyes_r_out = detect_eyes_with_retry(
            rotated, face_r, config.eye_schedule, upper_fraction=config.eye_upper_fraction
        )
        clock.lap("detect_eyes_rotated")
        if eyes_r_out.pair is None:
            return routed("enf_r")
        pair_r = eyes_r_out.pair
    else:
        pair_r = order_eyes(
            transform_point(matrix, pair.left),
            transform_point(matrix, pair.right),
            frame="rotated",
        )
        clock.lap("transform_eyes")
    result.eyes_rotated = (pair_r.left, pair_r.right)
    result.post_angle_deg = eye_angle(pair_r)

    return _finish_crop(rotated, pair_r, path, result, config, clock)


def resume_with_manual_eyes(
    path: str | Path, left: Point, right: Point, config: PipelineConfig
) -> PipelineResult:
    """Continue the pipeline from human-clicked eye centers.

    Clicked points are trusted: the interocular and tilt plausibility
    tests are for weeding out detector false positives and are skipped
    here (only coincident points are rejected, by order_eyes).  The
    rotated eye positions come from transforming the clicked points, so
    nobody has to click twice.
    """
    path = Path(path)
    pair = order_eyes(tuple(left), tuple(right), frame="original")
    result = PipelineResult(input=path.name, outcome="failed", mode=config.mode,
                            config_hash=config.config_hash)
    clock = _StageClock()
    try:
        img = load_image(path)
    except FacepipeError as exc:
        clock.lap("load")
        result.error = str(exc).replace(str(path), path.name)
        result.stage_ms = clock.ms
        return result
    gray = to_grayscale(img) if isinstance(img, RgbImage) else img
    clock.lap("load")

    result.eyes = (pair.left, pair.right)
    theta = eye_angle(pair)
    result.theta_deg = theta
    center = ((gray.width - 1) / 2.0, (gray.height - 1) / 2.0)
    matrix = rotation_matrix(center, theta)
    rotated = warp_affine(gray, matrix, gray.width, gray.height)
    clock.lap("rotate")

    pair_r = order_eyes(
        transform_point(matrix, pair.left),
        transform_point(matrix, pair.right),
        frame="rotated",
    )
    result.eyes_rotated = (pair_r.left, pair_r.right)
    result.post_angle_deg = eye_angle(pair_r)
    return _finish_crop(rotated, pair_r, path, result, config, clock)


def list_input_images(input_dir: str | Path) -> list[Path]:
    """Regular files with a recognized image suffix, sorted by name."""
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise ImageIOError(f"input directory not found: {input_dir}")
    return sorted(
        p
        for p in input_dir.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES and not p.name.startswith(".")
    )


def run_batch(
    input_dir: str | Path, config: PipelineConfig, parallelism: int = 1
) -> list[PipelineResult]:
    """Process a directory of images and write manifest + timing files.

    The returned list and manifest.jsonl are sorted by input basename,
    so the content is independent of worker scheduling.  Bucket folders
    appear only when something lands in them; out/ always exists.
    """
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")
    files = list_input_images(input_dir)
    config.run_root.mkdir(parents=True, exist_ok=True)
    (config.run_root / OUTPUT_DIR).mkdir(exist_ok=True)

    if parallelism == 1 or len(files) <= 1:
        results = [process_image(p, config) for p in files]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(lambda p: process_image(p, config), files))
    results.sort(key=lambda r: r.input)

    write_manifest(results, config.run_root / "manifest.jsonl")
    with open(config.run_root / "timings.jsonl", "w") as fh:
        for r in results:
            fh.write(
                json.dumps(
                    {
                        "input": r.input,
                        "total_ms": round(sum(r.stage_ms.values()), 3),
                        "stage_ms": {k: round(v, 3) for k, v in r.stage_ms.items()},
                    }
                )
                + "\n"
            )
    return results


def write_manifest(results: list[PipelineResult], path: str | Path) -> None:
    with open(path, "w") as fh:
        for r in results:
            fh.write(json.dumps(r.manifest_record()) + "\n")


def append_manifest_record(record: dict, path: str | Path) -> None:
    """Append one row (used by the annotation service for manual outcomes)."""
    with open(path, "a") as fh:
        fh.write(json.dumps(record) + "\n")


def read_manifest(path: str | Path) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ImageIOError(f"cannot read manifest {path}: {exc}") from exc
    records = []
    for i, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ImageIOError(f"manifest {path} line {i}: {exc}") from exc
    return records


def stats(manifest_path: str | Path) -> dict:
    """Counts, success rate and θ quantiles for a finished run.

    If a timings.jsonl sidecar sits next to the manifest its mean stage
    wall times are folded in; timings never live in the manifest itself.
    """
    manifest_path = Path(manifest_path)
    records = read_manifest(manifest_path)
    total = len(records)
    outcomes: dict[str, int] = {}
    for r in records:
        outcomes[r["outcome"]] = outcomes.get(r["outcome"], 0) + 1
    ok = outcomes.get("ok", 0) + outcomes.get("manual_success", 0)
    thetas = sorted(abs(r["theta_deg"]) for r in records if r.get("theta_deg") is not None)

    def quantile(q: float) -> float | None:
        if not thetas:
            return None
        idx = min(len(thetas) - 1, int(round(q * (len(thetas) - 1))))
        return thetas[idx]

    summary = {
        "total": total,
        "outcomes": dict(sorted(outcomes.items())),
        "success": ok,
        "success_rate": (ok / total) if total else None,
        "abs_theta_deg": {
            "p50": quantile(0.5),
            "p90": quantile(0.9),
            "max": thetas[-1] if thetas else None,
        },
    }
    timings_path = manifest_path.parent / "timings.jsonl"
    if timings_path.exists():
        stage_sums: dict[str, float] = {}
        stage_counts: dict[str, int] = {}
        for t in read_manifest(timings_path):
            for stage, ms in t.get("stage_ms", {}).items():
                stage_sums[stage] = stage_sums.get(stage, 0.0) + ms
                stage_counts[stage] = stage_counts.get(stage, 0) + 1
        summary["mean_stage_ms"] = {
            stage: round(stage_sums[stage] / stage_counts[stage], 3)
            for stage in sorted(stage_sums)
        }
    return summary


def format_stats(summary: dict) -> str:
    """Human-readable table for the CLI."""
    lines = [f"{'outcome':<16s} count", "-" * 22]
    for outcome, count in summary["outcomes"].items():
        lines.append(f"{outcome:<16s} {count}")
    lines.append("-" * 22)
    lines.append(f"{'total':<16s} {summary['total']}")
    rate = summary["success_rate"]
    lines.append(f"success rate     {'n/a' if rate is None else f'{rate:.3f}'}")
    q = summary["abs_theta_deg"]
    if q["max"] is not None:
        lines.append(
            f"|theta| deg      p50={q['p50']:.2f} p90={q['p90']:.2f} max={q['max']:.2f}"
        )
    if "mean_stage_ms" in summary:
        lines.append("mean stage ms    " + "  ".join(
            f"{k}={v:.0f}" for k, v in summary["mean_stage_ms"].items()
        ))
    return "\n".join(lines)
