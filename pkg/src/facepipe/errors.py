"""Exception types shared across the pipeline."""


class FacepipeError(Exception):
    """Base class for all errors raised by this package."""


class ImageFormatError(FacepipeError):
    """Unsupported, malformed, or truncated image file."""


class ImageIOError(FacepipeError):
    """Filesystem-level failure while reading or writing an image."""


class BoundsError(FacepipeError):
    """A rectangle does not fit inside the image it is applied to."""


class CascadeFormatError(FacepipeError):
    """Cascade XML is malformed or uses an unsupported variant."""


class DegenerateEyePairError(FacepipeError):
    """Two eye points coincide; no orientation can be derived."""


class SingularMatrixError(FacepipeError):
    """Affine matrix cannot be inverted for warping."""
