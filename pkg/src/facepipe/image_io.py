"""Image file decode/encode.

Binary PGM (P5) and PPM (P6) are handled by our own codec so the byte
layout is pinned exactly (Netpbm, maxval 255).  PNG and JPEG go through
Pillow; JPEG is decode-only because lossy outputs would break golden
comparisons.
"""

from __future__ import annotations

import io
import os
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import ImageFormatError, ImageIOError
from .image import GrayImage, RgbImage

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8"


def _pnm_tokens(data: bytes, start: int, count: int) -> tuple[list[int], int]:
    """Read ``count`` whitespace-separated integers, honoring '#' comments."""
    tokens: list[int] = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace():
            j += 1
        if j == i:
            raise ImageFormatError("truncated PNM header")
        try:
            tokens.append(int(data[i:j]))
        except ValueError as exc:
            raise ImageFormatError(f"bad PNM header token {data[i:j]!r}") from exc
        i = j
    return tokens, i


def decode_pnm(data: bytes) -> GrayImage | RgbImage:
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"not a binary PGM/PPM file (magic {magic!r})")
    (w, h, maxval), pos = _pnm_tokens(data, 2, 3)
    if w < 1 or h < 1:
        raise ImageFormatError(f"bad PNM dimensions {w}x{h}")
    if not 0 < maxval <= 255:
        raise ImageFormatError(f"unsupported PNM maxval {maxval} (8-bit only)")
    pos += 1  # exactly one whitespace byte separates header and raster
    channels = 1 if magic == b"P5" else 3
    need = w * h * channels
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise ImageFormatError(
            f"truncated PNM raster: expected {need} bytes, got {len(raster)}"
        )
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return GrayImage(arr.reshape(h, w))
    return RgbImage(arr.reshape(h, w, 3))


def encode_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def encode_ppm(img: RgbImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def _decode_pil(data: bytes) -> GrayImage | RgbImage:
    try:
        pil = PILImage.open(io.BytesIO(data))
        pil.load()
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"undecodable image: {exc}") from exc
    except OSError as exc:
        raise ImageFormatError(f"corrupt image file: {exc}") from exc
    if pil.mode == "L":
        return GrayImage(np.asarray(pil))
    if pil.mode in ("I;16", "I", "F"):
        raise ImageFormatError(f"unsupported bit depth (mode {pil.mode})")
    if pil.mode != "RGB":
        pil = pil.convert("RGB")
    return RgbImage(np.asarray(pil))


def load_image(path: str | os.PathLike) -> GrayImage | RgbImage:
    """Decode a PGM/PPM/PNG/JPEG file into a pixel buffer.

    Single-channel files come back as GrayImage, everything else as
    RgbImage.  Raises ImageIOError for filesystem problems and
    ImageFormatError for undecodable content, both naming the path.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    try:
        if data[:2] in (b"P5", b"P6"):
            return decode_pnm(data)
        if data.startswith(_PNG_MAGIC) or data.startswith(_JPEG_MAGIC):
            return _decode_pil(data)
        raise ImageFormatError("unsupported format (not PGM/PPM/PNG/JPEG)")
    except ImageFormatError as exc:
        raise ImageFormatError(f"{path}: {exc}") from None


def save_image(img: GrayImage | RgbImage, path: str | os.PathLike) -> None:
    """Encode to the format implied by the extension (.pgm, .ppm or .png).

    All three formats are lossless: a save/load round trip reproduces
    the buffer bit for bit.
    """
    path = Path(path)
    ext = path.suffix.lower()
    if ext in (".pgm", ".ppm"):
        if ext == ".pgm":
            if not isinstance(img, GrayImage):
                raise ImageFormatError("PGM can only store single-channel images")
            payload = encode_pgm(img)
        else:
            if not isinstance(img, RgbImage):
                raise ImageFormatError("PPM can only store three-channel images")
            payload = encode_ppm(img)
        try:
            path.write_bytes(payload)
        except OSError as exc:
            raise ImageIOError(f"cannot write {path}: {exc}") from exc
        return
    if ext == ".png":
        pil = PILImage.fromarray(img.pixels)
        try:
            with open(path, "wb") as fh:
                pil.save(fh, format="PNG")
        except OSError as exc:
            raise ImageIOError(f"cannot write {path}: {exc}") from exc
        return
    raise ImageFormatError(f"unsupported output format {ext!r} (use .pgm, .ppm or .png)")


def encode_png_bytes(img: GrayImage | RgbImage) -> bytes:
    """PNG-encode in memory; used when serving previews over HTTP."""
    buf = io.BytesIO()
    PILImage.fromarray(img.pixels).save(buf, format="PNG")
    return buf.getvalue()
