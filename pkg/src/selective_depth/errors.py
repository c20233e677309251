"""Exception types raised across the depth pipeline."""


class DepthError(Exception):
    """Base class for all pipeline errors."""

    code = "depth_error"


class NumericalDegeneracy(DepthError):
    code = "numerical_degeneracy"


class InvalidRange(DepthError, ValueError):
    code = "invalid_range"


class InvalidCount(DepthError, ValueError):
    code = "invalid_count"


class RayParallel(DepthError):
    code = "ray_parallel"


class ImageTooSmall(DepthError, ValueError):
    code = "image_too_small"


class EmptyRoi(DepthError, ValueError):
    code = "empty_roi"


class DimensionMismatch(DepthError, ValueError):
    code = "dimension_mismatch"


class FragmentMismatch(DepthError, ValueError):
    code = "fragment_mismatch"


class OutOfRange(DepthError, IndexError):
    code = "out_of_range"


class DegenerateSize(DepthError, ValueError):
    code = "degenerate_size"


class IoFailure(DepthError, OSError):
    code = "io_failure"


class NoRois(DepthError):
    code = "no_rois"
