"""Multi-scale sliding-window detection and the face -> eyes logic.

The scan follows detectMultiScale semantics with the scale-the-window
strategy: window sizes grow geometrically by scale_factor, the step at
each scale is max(1, round(scale)) pixels, passing windows are grouped by
the standard similarity predicate, and groups with more than
min_neighbors members survive.

The per-scale scan is vectorized: all grid windows are evaluated stage by
stage, with windows that fail a stage dropped from the working set, so
the numbers produced are identical to the scalar eval_window path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .align import EyePair, eye_angle
from .cascade import CascadeModel, norm_rect, parse_cascade
from .errors import DegenerateEyePairError
from .image import GrayImage, IntegralImage, Rect, crop, integral

MAX_EYE_TILT_DEG = 15.0
MIN_INTEROCULAR_FRACTION = 0.2  # one fifth of the image width

GROUP_EPS = 0.2

Point = tuple[float, float]


@dataclass(frozen=True)
class DetectParams:
    """detectMultiScale knobs: sf (scale_factor) and mn (min_neighbors).

    min_size/max_size bound the window side length in pixels; 0 and None
    leave the respective end unconstrained (base window size up to the
    image).
    """

    scale_factor: float = 1.1
    min_neighbors: int = 5
    min_size: int = 0
    max_size: int | None = None

    def __post_init__(self):
        if not self.scale_factor > 1.0:
            raise ValueError(f"scale_factor must be > 1, got {self.scale_factor}")
        if self.min_neighbors < 0:
            raise ValueError(f"min_neighbors must be >= 0, got {self.min_neighbors}")
        if self.min_size < 0:
            raise ValueError(f"min_size must be >= 0, got {self.min_size}")
        if self.max_size is not None and self.max_size < 1:
            raise ValueError(f"max_size must be >= 1, got {self.max_size}")


#: Eye-detection retry ladder: relax min_neighbors and min_size until the
#: cascade finds a pair that passes validation.
DEFAULT_EYE_SCHEDULE: tuple[DetectParams, ...] = (
    DetectParams(scale_factor=1.05, min_neighbors=5, min_size=30),
    DetectParams(scale_factor=1.05, min_neighbors=3, min_size=24),
    DetectParams(scale_factor=1.05, min_neighbors=2, min_size=0),
)

DEFAULT_FACE_PARAMS = DetectParams(scale_factor=1.1, min_neighbors=5)
DEFAULT_EYE_PARAMS = DetectParams(scale_factor=1.05, min_neighbors=3)


class RejectReason(enum.Enum):
    ANGLE = "angle"
    INTEROCULAR = "interocular"


@lru_cache(maxsize=None)
def default_face_model() -> CascadeModel:
    text = resources.files("facepipe").joinpath("data/haarcascade_frontalface_default.xml").read_text()
    return parse_cascade(text)


@lru_cache(maxsize=None)
def default_eye_model() -> CascadeModel:
    text = resources.files("facepipe").joinpath("data/haarcascade_eye.xml").read_text()
    return parse_cascade(text)


def _rint(v) -> int:
    return int(np.rint(v))


def _scan_scale(
    model: CascadeModel,
    ii: IntegralImage,
    scale: float,
    win_w: int,
    win_h: int,
    step: int,
) -> list[tuple[int, int]]:
    """Origins of windows of (win_w, win_h) passing every stage at this scale.

    Per-coordinate rounding can push a scaled feature rect one pixel past
    the nominal window edge, so the grid is clipped to the widest extent
    any rect reaches rather than to the window size alone.
    """
    img_w = ii.width - 1
    img_h = ii.height - 1
    stride = ii.width

    nr = norm_rect(model.base_width, model.base_height, scale)
    packed = model.packed
    sc = np.rint(packed.rect_coords * scale).astype(np.int64)
    ext_w = max(win_w, nr.x + nr.w, int((sc[:, 0] + sc[:, 2]).max()))
    ext_h = max(win_h, nr.y + nr.h, int((sc[:, 1] + sc[:, 3]).max()))
    xs = np.arange(0, img_w - ext_w + 1, step, dtype=np.int64)
    ys = np.arange(0, img_h - ext_h + 1, step, dtype=np.int64)
    if xs.size == 0 or ys.size == 0:
        return []
    bases = (ys[:, None] * stride + xs[None, :]).ravel()

    flat = ii.flat_sums
    flat_sq = ii.flat_sq_sums
    n00 = nr.y * stride + nr.x
    n01 = n00 + nr.w
    n10 = n00 + nr.h * stride
    n11 = n10 + nr.w
    s1 = (flat[bases + n11] - flat[bases + n10] - flat[bases + n01] + flat[bases + n00]).astype(
        np.float64
    )
    s2 = (
        flat_sq[bases + n11] - flat_sq[bases + n10] - flat_sq[bases + n01] + flat_sq[bases + n00]
    ).astype(np.float64)
    area = float(nr.area)
    nf2 = area * s2 - s1 * s1
    inv = np.empty_like(nf2)
    positive = nf2 > 0.0
    inv[positive] = 1.0 / np.sqrt(nf2[positive])
    inv[~positive] = 1.0 / area

    off00 = sc[:, 1] * stride + sc[:, 0]
    off01 = off00 + sc[:, 2]
    off10 = off00 + sc[:, 3] * stride
    off11 = off10 + sc[:, 2]
    weights = packed.rect_weights
    feat_ptr = packed.feat_ptr

    nstages = len(packed.stage_thresholds)
    for si in range(nstages):
        vals = np.zeros(bases.size, dtype=np.float64)
        for s in range(packed.stage_ptr[si], packed.stage_ptr[si + 1]):
            raw = np.zeros(bases.size, dtype=np.float64)
            for r in range(feat_ptr[s], feat_ptr[s + 1]):
                rect_sums = (
                    flat[bases + off11[r]]
                    - flat[bases + off10[r]]
                    - flat[bases + off01[r]]
                    + flat[bases + off00[r]]
                )
                raw += rect_sums * weights[r]
            stump_vals = raw * inv
            vals += np.where(
                stump_vals < packed.thresholds[s], packed.left_vals[s], packed.right_vals[s]
            )
        keep = vals >= packed.stage_thresholds[si]
        bases = bases[keep]
        inv = inv[keep]
        if bases.size == 0:
            return []
    return [(int(b % stride), int(b // stride)) for b in bases]


def detect_multi_scale(model: CascadeModel, img: GrayImage, p: DetectParams) -> list[Rect]:
    """All grouped detections, sorted by descending area.

    Images smaller than the base window yield an empty list.
    """
    return [r for r, _ in detect_multi_scale_with_neighbors(model, img, p)]


def detect_multi_scale_with_neighbors(
    model: CascadeModel, img: GrayImage, p: DetectParams
) -> list[tuple[Rect, int]]:
    """Like detect_multi_scale but keeps each group's candidate count."""
    if img.width < model.base_width or img.height < model.base_height:
        return []
    ii = integral(img, with_squares=True)
    candidates: list[Rect] = []
    scale = 1.0
    while True:
        win_w = _rint(model.base_width * scale)
        win_h = _rint(model.base_height * scale)
        if win_w > img.width or win_h > img.height:
            break
        if p.max_size is not None and (win_w > p.max_size or win_h > p.max_size):
            break
        if win_w >= p.min_size and win_h >= p.min_size:
            step = max(1, _rint(scale))
            for x, y in _scan_scale(model, ii, scale, win_w, win_h, step):
                candidates.append(Rect(x, y, win_w, win_h))
        scale *= p.scale_factor
    grouped = _group_with_neighbors(candidates, p.min_neighbors)
    grouped.sort(key=lambda rn: (-rn[0].area, rn[0].x, rn[0].y, rn[0].w))
    return grouped


def _similarity_delta(w1: int, h1: int, w2: int, h2: int) -> float:
    return GROUP_EPS * 0.5 * (min(w1, w2) + min(h1, h2))


def group_rectangles(candidates: list[Rect], min_neighbors: int) -> list[Rect]:
    """Cluster similar rects and keep clusters with > min_neighbors members.

    Two rects are similar when their corners differ by at most
    0.2 x mean(min width, min height).  Each surviving cluster is replaced
    by its average rect; averaged rects contained in a larger accepted
    rect are suppressed.  min_neighbors <= 0 returns the raw candidates.
    """
    return [r for r, _ in _group_with_neighbors(candidates, min_neighbors)]


def _group_with_neighbors(candidates: list[Rect], min_neighbors: int) -> list[tuple[Rect, int]]:
    if min_neighbors <= 0 or not candidates:
        return [(r, 1) for r in candidates]
    n = len(candidates)
    x = np.array([r.x for r in candidates], dtype=np.float64)
    y = np.array([r.y for r in candidates], dtype=np.float64)
    w = np.array([r.w for r in candidates], dtype=np.float64)
    h = np.array([r.h for r in candidates], dtype=np.float64)
    x2 = x + w
    y2 = y + h

    parent = np.arange(n)

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        delta = GROUP_EPS * 0.5 * (np.minimum(w[i], w) + np.minimum(h[i], h))
        similar = (
            (np.abs(x - x[i]) <= delta)
            & (np.abs(y - y[i]) <= delta)
            & (np.abs(x2 - x2[i]) <= delta)
            & (np.abs(y2 - y2[i]) <= delta)
        )
        ri = find(i)
        for j in np.flatnonzero(similar[i + 1 :]) + i + 1:
            rj = find(int(j))
            if ri != rj:
                parent[rj] = ri
    roots = np.array([find(i) for i in range(n)])

    averaged: list[tuple[Rect, int]] = []
    for root in sorted(set(roots.tolist())):
        members = np.flatnonzero(roots == root)
        count = len(members)
        if count <= min_neighbors:
            continue
        avg = Rect(
            _rint(x[members].sum() / count),
            _rint(y[members].sum() / count),
            _rint(w[members].sum() / count),
            _rint(h[members].sum() / count),
        )
        averaged.append((avg, count))

    kept: list[tuple[Rect, int]] = []
    for i, (r1, n1) in enumerate(averaged):
        inside_larger = any(
            j != i and r2.contains(r1) and r2.area > r1.area for j, (r2, _) in enumerate(averaged)
        )
        if not inside_larger:
            kept.append((r1, n1))
    return kept


def detect_face(
    img: GrayImage,
    p: DetectParams = DEFAULT_FACE_PARAMS,
    model: CascadeModel | None = None,
) -> Rect | None:
    """Largest detected face, or None."""
    model = model or default_face_model()
    hits = detect_multi_scale(model, img, p)
    return hits[0] if hits else None


def eye_centers(b1: Rect, b2: Rect) -> tuple[Point, Point]:
    """Bounding-box centers, real-valued."""
    return (b1.x + b1.w / 2.0, b1.y + b1.h / 2.0), (b2.x + b2.w / 2.0, b2.y + b2.h / 2.0)


def order_eyes(a: Point, b: Point, frame: str = "original") -> EyePair:
    """Deterministic subject-left/right assignment: larger image x is left.

    Mugshots face the camera, so the subject's left eye appears on the
    image's right side.  Exact x ties fall back to larger y; coincident
    points are rejected.
    """
    if a == b:
        raise DegenerateEyePairError(f"coincident eye points {a}")
    if (a[0], a[1]) > (b[0], b[1]):
        return EyePair(left=a, right=b, frame=frame)
    return EyePair(left=b, right=a, frame=frame)


def validate_eye_pair(pair: EyePair, image_width: int) -> RejectReason | None:
    """The two geometric plausibility tests for a detected eye pair.

    Rejects when the eye-line tilt exceeds 15 degrees, then when the
    interocular distance is under one fifth of the image width.  Returns
    None for a valid pair.
    """
    if abs(eye_angle(pair)) > MAX_EYE_TILT_DEG:
        return RejectReason.ANGLE
    if pair.interocular < image_width * MIN_INTEROCULAR_FRACTION:
        return RejectReason.INTEROCULAR
    return None


def detect_eyes(
    img: GrayImage,
    face: Rect,
    p: DetectParams = DEFAULT_EYE_PARAMS,
    model: CascadeModel | None = None,
    upper_fraction: float | None = None,
) -> EyePair | None:
    """Eye pair inside the face ROI, in original-image coordinates.

    Candidate boxes are ranked by grouped neighbor count (ties: larger
    area, then leftmost); the top two become the pair.  upper_fraction
    optionally restricts the search to the top part of the face box.
    """
    model = model or default_eye_model()
    roi_rect = face
    if upper_fraction is not None:
        roi_rect = Rect(face.x, face.y, face.w, max(1, _rint(face.h * upper_fraction)))
    roi = crop(img, roi_rect)
    boxes = detect_multi_scale_with_neighbors(model, roi, p)
    if len(boxes) < 2:
        return None
    boxes.sort(key=lambda rn: (-rn[1], -rn[0].area, rn[0].x))
    (b1, _), (b2, _) = boxes[0], boxes[1]
    c1, c2 = eye_centers(b1, b2)
    c1 = (c1[0] + roi_rect.x, c1[1] + roi_rect.y)
    c2 = (c2[0] + roi_rect.x, c2[1] + roi_rect.y)
    try:
        return order_eyes(c1, c2, frame="original")
    except DegenerateEyePairError:
        return None


@dataclass(frozen=True)
class RetryOutcome:
    """Result of the parameter-refinement loop over an eye schedule."""

    pair: EyePair | None  # first detected pair that also validated
    attempts: int
    last_detected: EyePair | None  # last raw detection, valid or not

    @property
    def ok(self) -> bool:
        return self.pair is not None


def detect_eyes_with_retry(
    img: GrayImage,
    face: Rect,
    schedule: tuple[DetectParams, ...] = DEFAULT_EYE_SCHEDULE,
    model: CascadeModel | None = None,
    upper_fraction: float | None = None,
) -> RetryOutcome:
    """Try each parameter set until a detection passes validation."""
    if not schedule:
        raise ValueError("eye parameter schedule must not be empty")
    last: EyePair | None = None
    attempts = 0
    for params in schedule:
        attempts += 1
        pair = detect_eyes(img, face, params, model=model, upper_fraction=upper_fraction)
        if pair is None:
            continue
        last = pair
        if validate_eye_pair(pair, img.width) is None:
            return RetryOutcome(pair=pair, attempts=attempts, last_detected=pair)
    return RetryOutcome(pair=None, attempts=attempts, last_detected=last)
