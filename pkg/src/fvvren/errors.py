"""Exception classes shared across the pipeline."""


class FvvError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(FvvError):
    """Invalid configuration or mismatched inputs (counts, dimensions)."""


class ParseError(FvvError):
    """Malformed input file; message carries file/field context."""


class ValidationError(FvvError):
    """Well-formed file whose contents violate an invariant."""


class BehindCameraError(FvvError):
    """3D point at or behind the camera plane during projection."""


class InvalidDepthError(FvvError):
    """Non-positive depth passed where a positive depth is required."""


class PixelBoundsError(FvvError):
    """Pixel coordinate outside the image raster."""


class EmptyHullError(FvvError):
    """Operation requires at least one occupied voxel."""


class NoCrossingError(FvvError):
    """Occupancy does not change sign on the given segment."""


class ShapeError(FvvError):
    """Array shape incompatible with the operation."""


class InputError(FvvError):
    """Non-finite or otherwise unusable numeric input."""


class UndefinedMetricError(FvvError):
    """Metric requested over an empty mask."""


class PipelineStageError(FvvError):
    """Failure inside a pipeline stage; carries the stage label."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause
