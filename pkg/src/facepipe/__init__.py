"""Face pre-processing for recognition datasets.

Pure-numpy pipeline that takes raw portrait photos to aligned 60x70
grayscale face chips: cascade face/eye detection, geometric validation of
the eye pair, in-plane rotation that levels the eye line, and a
proportional crop around the eye midpoint.  Images the automatic stages
cannot handle are routed to failure buckets for manual annotation.
"""

from .align import (
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
from .cascade import CascadeModel, parse_cascade
from .detect import (
    DEFAULT_EYE_SCHEDULE,
    DetectParams,
    RejectReason,
    default_eye_model,
    default_face_model,
    detect_eyes,
    detect_eyes_with_retry,
    detect_face,
    detect_multi_scale,
    group_rectangles,
    order_eyes,
    validate_eye_pair,
)
from .errors import (
    BoundsError,
    CascadeFormatError,
    DegenerateEyePairError,
    FacepipeError,
    ImageFormatError,
    ImageIOError,
    SingularMatrixError,
)
from .image import (
    GrayImage,
    IntegralImage,
    Rect,
    RgbImage,
    crop,
    integral,
    resize_bilinear,
    to_grayscale,
)
from .image_io import load_image, save_image

__version__ = "0.1.0"

__all__ = [
    "AffineMatrix",
    "BoundsError",
    "CascadeFormatError",
    "CascadeModel",
    "CropBox",
    "DEFAULT_EYE_SCHEDULE",
    "DegenerateEyePairError",
    "DetectParams",
    "EyePair",
    "FacepipeError",
    "GrayImage",
    "ImageFormatError",
    "ImageIOError",
    "IntegralImage",
    "Rect",
    "RejectReason",
    "RgbImage",
    "SingularMatrixError",
    "crop",
    "default_eye_model",
    "default_face_model",
    "detect_eyes",
    "detect_eyes_with_retry",
    "detect_face",
    "detect_multi_scale",
    "eye_angle",
    "face_crop_box",
    "group_rectangles",
    "integral",
    "invert_affine",
    "load_image",
    "order_eyes",
    "parse_cascade",
    "resize_bilinear",
    "rotation_matrix",
    "save_image",
    "snap_crop_box",
    "to_grayscale",
    "transform_point",
    "validate_eye_pair",
    "warp_affine",
]
