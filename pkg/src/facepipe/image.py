"""Pixel buffers and the raster operations the pipeline is built on.

Images are thin immutable wrappers around uint8 numpy arrays (row-major,
y growing downward).  Integral images use an (h+1, w+1) table with a zero
first row/column so rectangle sums never need corner special cases.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import BoundsError

GRAY_WEIGHTS = (0.299, 0.587, 0.114)  # R, G, B


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle; (x, y) is the top-left corner, y grows down."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"rect sides must be positive, got {self.w}x{self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def contains(self, other: "Rect") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and self.right >= other.right
            and self.bottom >= other.bottom
        )

    def fits_in(self, width: int, height: int) -> bool:
        return self.x >= 0 and self.y >= 0 and self.right <= width and self.bottom <= height

    def iou(self, other: "Rect") -> float:
        ix = max(0, min(self.right, other.right) - max(self.x, other.x))
        iy = max(0, min(self.bottom, other.bottom) - max(self.y, other.y))
        inter = ix * iy
        union = self.area + other.area - inter
        return inter / union if union else 0.0


def _as_uint8(pixels, expected_ndim: int) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim != expected_ndim:
        raise ValueError(f"expected a {expected_ndim}-d array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("image must contain at least one pixel")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"pixel values must be integers, got dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("pixel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel image, shape (height, width), values in [0, 255]."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_uint8(self.pixels, 2))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Interleaved R,G,B image, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = _as_uint8(self.pixels, 3)
        if arr.shape[2] != 3:
            raise ValueError(f"expected 3 channels, got {arr.shape[2]}")
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Cumulative-sum table: sums[y, x] = sum of pixels in [0, x) x [0, y).

    ``sq_sums`` (same layout, squared pixels) is present when the integral
    was built for variance-normalized cascade evaluation.
    """

    sums: np.ndarray
    sq_sums: np.ndarray | None = None

    @property
    def width(self) -> int:
        return self.sums.shape[1]

    @property
    def height(self) -> int:
        return self.sums.shape[0]

    @cached_property
    def flat_sums(self) -> np.ndarray:
        return self.sums.reshape(-1)

    @cached_property
    def flat_sq_sums(self) -> np.ndarray:
        if self.sq_sums is None:
            raise ValueError("integral image was built without squared sums")
        return self.sq_sums.reshape(-1)

    def rect_sum(self, r: Rect) -> int:
        s = self.sums
        return int(s[r.y + r.h, r.x + r.w] - s[r.y, r.x + r.w] - s[r.y + r.h, r.x] + s[r.y, r.x])

    def rect_sq_sum(self, r: Rect) -> int:
        if self.sq_sums is None:
            raise ValueError("integral image was built without squared sums")
        s = self.sq_sums
        return int(s[r.y + r.h, r.x + r.w] - s[r.y, r.x + r.w] - s[r.y + r.h, r.x] + s[r.y, r.x])


def to_grayscale(img: RgbImage) -> GrayImage:
    """Convert to luminance Y = 0.299 R + 0.587 G + 0.114 B.

    Rounded to the nearest integer, ties away from zero (values are
    non-negative, so floor(y + 0.5)), then clamped to [0, 255].
    """
    rgb = img.pixels.astype(np.float64)
    y = GRAY_WEIGHTS[0] * rgb[:, :, 0] + GRAY_WEIGHTS[1] * rgb[:, :, 1] + GRAY_WEIGHTS[2] * rgb[:, :, 2]
    y = np.floor(y + 0.5)
    return GrayImage(np.clip(y, 0, 255).astype(np.uint8))


def integral(img: GrayImage, with_squares: bool = False) -> IntegralImage:
    """Build the summed-area table (optionally with a squared-sum plane)."""
    h, w = img.pixels.shape
    sums = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(img.pixels, axis=0, dtype=np.int64, out=sums[1:, 1:])
    np.cumsum(sums[1:, 1:], axis=1, out=sums[1:, 1:])
    sq = None
    if with_squares:
        sq = np.zeros((h + 1, w + 1), dtype=np.int64)
        squares = img.pixels.astype(np.int64) ** 2
        np.cumsum(squares, axis=0, out=sq[1:, 1:])
        np.cumsum(sq[1:, 1:], axis=1, out=sq[1:, 1:])
    sums.setflags(write=False)
    if sq is not None:
        sq.setflags(write=False)
    return IntegralImage(sums, sq)


def crop(img: GrayImage, r: Rect) -> GrayImage:
    """Slice the rectangle ``r`` out of ``img``."""
    if not r.fits_in(img.width, img.height):
        raise BoundsError(
            f"crop rect {r} does not fit inside {img.width}x{img.height} image"
        )
    return GrayImage(img.pixels[r.y : r.y + r.h, r.x : r.x + r.w])


def resize_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Bilinear resize with pixel-center alignment and edge clamping.

    Source coordinate for destination index d is (d + 0.5) * scale - 0.5,
    clamped into the source domain, so identical sizes reproduce the input
    exactly and samples never read outside the image.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be at least 1x1, got {out_w}x{out_h}")
    src = img.pixels.astype(np.float64)
    h, w = src.shape

    sx = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    sy = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = (sy - y0)[:, None]

    top = src[y0[:, None], x0] * (1 - fx) + src[y0[:, None], x1] * fx
    bot = src[y1[:, None], x0] * (1 - fx) + src[y1[:, None], x1] * fx
    out = top * (1 - fy) + bot * fy
    return GrayImage(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))
