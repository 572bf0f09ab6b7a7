"""Robust online subspace tracking for background subtraction.

The core package is plain numpy; the ``prost.service`` subpackage wraps
it in an HTTP API and ``prost.cli`` is a thin client over that API.
"""

from .cost import LpConfig, smoothed_lp_cost, smoothing_from_threshold
from .errors import (
    CodecError,
    ConfigError,
    DimensionError,
    NonFiniteError,
    ProstError,
    SequenceError,
    SnapshotError,
)
from .evaluate import (
    ConfusionCounts,
    MeasureSet,
    SyntheticStreamSpec,
    accumulate,
    generate_stream,
    measures,
    subspace_error,
)
from .fit import CgOptions, fit_coordinates
from .jobs import RunConfig, StreamTracker
from .manifold import SubspaceBasis, random_orthonormal
from .pipeline import FrameBuffer, SegmentationMask
from .tracker import ProstParams, TrackerState, bootstrap, process_frame

__version__ = "0.1.0"

__all__ = [
    "LpConfig",
    "smoothed_lp_cost",
    "smoothing_from_threshold",
    "ProstError",
    "ConfigError",
    "DimensionError",
    "NonFiniteError",
    "CodecError",
    "SequenceError",
    "SnapshotError",
    "ConfusionCounts",
    "MeasureSet",
    "SyntheticStreamSpec",
    "accumulate",
    "generate_stream",
    "measures",
    "subspace_error",
    "CgOptions",
    "fit_coordinates",
    "RunConfig",
    "StreamTracker",
    "SubspaceBasis",
    "random_orthonormal",
    "FrameBuffer",
    "SegmentationMask",
    "ProstParams",
    "TrackerState",
    "bootstrap",
    "process_frame",
    "__version__",
]
