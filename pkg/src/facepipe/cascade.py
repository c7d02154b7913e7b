"""OpenCV "new style" Haar cascade files: parsing and window evaluation.

Only the post-2.x XML schema is supported (stageType BOOST, featureType
HAAR, stump weak classifiers, no tilted features).  Detection windows are
scaled rather than the image: rectangle coordinates are multiplied by the
window scale and rounded to the nearest pixel, and feature sums are
divided by (norm-area * window std), which is the normalization the stock
stage thresholds were trained against.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CascadeFormatError
from .image import IntegralImage, Rect


def _rint(v: float) -> int:
    """Round to nearest integer, ties to even (cvRound-compatible)."""
    return int(np.rint(v))


@dataclass(frozen=True)
class HaarFeature:
    """2-3 weighted rectangles in base-window coordinates."""

    rects: tuple[tuple[Rect, float], ...]
    tilted: bool = False


@dataclass(frozen=True)
class WeakClassifier:
    """Decision stump: value < threshold -> left_val, else right_val."""

    feature: HaarFeature
    threshold: float
    left_val: float
    right_val: float


@dataclass(frozen=True)
class CascadeStage:
    classifiers: tuple[WeakClassifier, ...]
    stage_threshold: float


@dataclass(frozen=True, eq=False)
class CascadeModel:
    base_width: int
    base_height: int
    stages: tuple[CascadeStage, ...]

    @property
    def num_stumps(self) -> int:
        return sum(len(s.classifiers) for s in self.stages)

    @cached_property
    def packed(self) -> "PackedCascade":
        return PackedCascade.from_model(self)


@dataclass(frozen=True, eq=False)
class PackedCascade:
    """Flat array layout of a CascadeModel for vectorized scanning.

    rect_coords[i] = (x, y, w, h) of the i-th rectangle in base-window
    coordinates; feat_ptr delimits each stump's rectangle run (stumps and
    features are stored 1:1, in stage order).
    """

    rect_coords: np.ndarray  # (R, 4) int64
    rect_weights: np.ndarray  # (R,) float64
    feat_ptr: np.ndarray  # (S + 1,) int64
    thresholds: np.ndarray  # (S,) float64
    left_vals: np.ndarray  # (S,) float64
    right_vals: np.ndarray  # (S,) float64
    stage_ptr: np.ndarray  # (nstages + 1,) int64
    stage_thresholds: np.ndarray  # (nstages,) float64

    @classmethod
    def from_model(cls, model: CascadeModel) -> "PackedCascade":
        coords, weights, feat_ptr = [], [], [0]
        thresholds, lefts, rights = [], [], []
        stage_ptr, stage_thr = [0], []
        for stage in model.stages:
            for wc in stage.classifiers:
                for rect, weight in wc.feature.rects:
                    coords.append((rect.x, rect.y, rect.w, rect.h))
                    weights.append(weight)
                feat_ptr.append(len(coords))
                thresholds.append(wc.threshold)
                lefts.append(wc.left_val)
                rights.append(wc.right_val)
            stage_ptr.append(len(thresholds))
            stage_thr.append(stage.stage_threshold)
        return cls(
            rect_coords=np.asarray(coords, dtype=np.int64),
            rect_weights=np.asarray(weights, dtype=np.float64),
            feat_ptr=np.asarray(feat_ptr, dtype=np.int64),
            thresholds=np.asarray(thresholds, dtype=np.float64),
            left_vals=np.asarray(lefts, dtype=np.float64),
            right_vals=np.asarray(rights, dtype=np.float64),
            stage_ptr=np.asarray(stage_ptr, dtype=np.int64),
            stage_thresholds=np.asarray(stage_thr, dtype=np.float64),
        )


def _text(elem: ET.Element, tag: str) -> str:
    child = elem.find(tag)
    if child is None or child.text is None:
        raise CascadeFormatError(f"missing <{tag}> element")
    return child.text.strip()


def parse_cascade(xml_text: str) -> CascadeModel:
    """Parse cascade XML into a typed model.

    Raises CascadeFormatError for anything outside the supported schema:
    non-BOOST stages, non-HAAR features, tilted rectangles, tree (multi
    node) weak classifiers, or rectangles leaving the base window.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise CascadeFormatError(f"malformed XML: {exc}") from exc

    cascade = root.find("cascade") if root.tag != "cascade" else root
    if cascade is None:
        raise CascadeFormatError("no <cascade> element found")

    stage_type = _text(cascade, "stageType")
    if stage_type != "BOOST":
        raise CascadeFormatError(f"unsupported stageType {stage_type!r} (want BOOST)")
    feature_type = _text(cascade, "featureType")
    if feature_type != "HAAR":
        raise CascadeFormatError(f"unsupported featureType {feature_type!r} (want HAAR)")

    base_w = int(_text(cascade, "width"))
    base_h = int(_text(cascade, "height"))
    if base_w <= 0 or base_h <= 0:
        raise CascadeFormatError(f"bad base window {base_w}x{base_h}")

    features_elem = cascade.find("features")
    if features_elem is None:
        raise CascadeFormatError("missing <features> table")
    features: list[HaarFeature] = []
    for fi, felem in enumerate(features_elem):
        tilted_elem = felem.find("tilted")
        tilted = tilted_elem is not None and (tilted_elem.text or "0").strip() not in ("0", "")
        if tilted:
            raise CascadeFormatError(
                f"feature {fi}: tilted (45-degree) features are not supported"
            )
        rects_elem = felem.find("rects")
        if rects_elem is None:
            raise CascadeFormatError(f"feature {fi}: missing <rects>")
        rects: list[tuple[Rect, float]] = []
        for relem in rects_elem:
            parts = (relem.text or "").split()
            if len(parts) != 5:
                raise CascadeFormatError(f"feature {fi}: rect needs 5 fields, got {parts}")
            x, y, w, h = (int(p) for p in parts[:4])
            weight = float(parts[4])
            if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > base_w or y + h > base_h:
                raise CascadeFormatError(
                    f"feature {fi}: rect ({x},{y},{w},{h}) outside {base_w}x{base_h} base window"
                )
            rects.append((Rect(x, y, w, h), weight))
        if not 2 <= len(rects) <= 3:
            raise CascadeFormatError(f"feature {fi}: expected 2-3 rects, got {len(rects)}")
        features.append(HaarFeature(rects=tuple(rects), tilted=False))

    stages_elem = cascade.find("stages")
    if stages_elem is None:
        raise CascadeFormatError("missing <stages>")
    stages: list[CascadeStage] = []
    for si, selem in enumerate(stages_elem):
        stage_threshold = float(_text(selem, "stageThreshold"))
        wc_elem = selem.find("weakClassifiers")
        if wc_elem is None:
            raise CascadeFormatError(f"stage {si}: missing <weakClassifiers>")
        classifiers: list[WeakClassifier] = []
        for ci, celem in enumerate(wc_elem):
            nodes = _text(celem, "internalNodes").split()
            leaves = [float(v) for v in _text(celem, "leafValues").split()]
            if len(nodes) != 4:
                raise CascadeFormatError(
                    f"stage {si} classifier {ci}: tree weak classifiers are not supported "
                    f"(got {len(nodes) // 4} internal nodes, want a single stump)"
                )
            left_id, right_id = int(nodes[0]), int(nodes[1])
            feat_idx, threshold = int(nodes[2]), float(nodes[3])
            if left_id > 0 or right_id > 0:
                raise CascadeFormatError(
                    f"stage {si} classifier {ci}: tree weak classifiers are not supported"
                )
            if not 0 <= feat_idx < len(features):
                raise CascadeFormatError(
                    f"stage {si} classifier {ci}: feature index {feat_idx} out of range"
                )
            try:
                left_val = leaves[-left_id]
                right_val = leaves[-right_id]
            except IndexError as exc:
                raise CascadeFormatError(
                    f"stage {si} classifier {ci}: leaf index out of range"
                ) from exc
            classifiers.append(
                WeakClassifier(
                    feature=features[feat_idx],
                    threshold=threshold,
                    left_val=left_val,
                    right_val=right_val,
                )
            )
        stages.append(CascadeStage(tuple(classifiers), stage_threshold))

    declared = cascade.findtext("stageNum")
    if declared is not None and int(declared.strip()) != len(stages):
        raise CascadeFormatError(
            f"stage count mismatch: file declares {declared.strip()}, found {len(stages)}"
        )
    return CascadeModel(base_width=base_w, base_height=base_h, stages=tuple(stages))


def scale_rect(r: Rect, scale: float) -> Rect:
    """Scale base-window rect coordinates, rounding each to nearest pixel."""
    return Rect(_rint(r.x * scale), _rint(r.y * scale), _rint(r.w * scale), _rint(r.h * scale))


def norm_rect(base_w: int, base_h: int, scale: float) -> Rect:
    """The variance-normalization rectangle: base window inset by one pixel."""
    return Rect(_rint(scale), _rint(scale), _rint((base_w - 2) * scale), _rint((base_h - 2) * scale))


def _base_size_from_window(window: Rect, scale: float) -> tuple[int, int]:
    # Exact inverse of round(base * scale) for scale >= 1.
    return _rint(window.w / scale), _rint(window.h / scale)


def window_inv_norm(ii: IntegralImage, window: Rect, scale: float, base_w: int, base_h: int) -> float:
    """1 / (norm-area * window std); flat windows use std = 1."""
    nr = norm_rect(base_w, base_h, scale)
    shifted = Rect(window.x + nr.x, window.y + nr.y, nr.w, nr.h)
    s1 = float(ii.rect_sum(shifted))
    s2 = float(ii.rect_sq_sum(shifted))
    area = float(nr.area)
    nf2 = area * s2 - s1 * s1
    if nf2 > 0.0:
        return 1.0 / np.sqrt(nf2)
    return 1.0 / area


def feature_value(f: HaarFeature, ii: IntegralImage, window: Rect, scale: float) -> float:
    """Variance-normalized feature sum for one detection window."""
    base_w, base_h = _base_size_from_window(window, scale)
    inv = window_inv_norm(ii, window, scale, base_w, base_h)
    raw = 0.0
    for rect, weight in f.rects:
        sr = scale_rect(rect, scale)
        raw += float(ii.rect_sum(Rect(window.x + sr.x, window.y + sr.y, sr.w, sr.h))) * weight
    return raw * inv


def eval_window(
    model: CascadeModel,
    ii: IntegralImage,
    window: Rect,
    scale: float,
    early_exit: bool = True,
) -> bool:
    """True iff the window passes every stage in order.

    With early_exit=False all stages are evaluated and the per-stage
    decisions conjoined; the result must be identical (property-tested).
    """
    inv = window_inv_norm(ii, window, scale, model.base_width, model.base_height)
    passed = True
    for stage in model.stages:
        total = 0.0
        for wc in stage.classifiers:
            raw = 0.0
            for rect, weight in wc.feature.rects:
                sr = scale_rect(rect, scale)
                raw += float(ii.rect_sum(Rect(window.x + sr.x, window.y + sr.y, sr.w, sr.h))) * weight
            total += wc.left_val if raw * inv < wc.threshold else wc.right_val
        if total < stage.stage_threshold:
            if early_exit:
                return False
            passed = False
    return passed
