"""Support vector data description with trace-criterion bandwidth selection."""

from .errors import (
    BracketError,
    DataError,
    DegenerateGeometryError,
    InsufficientDataError,
    NonConvergence,
    NumericalError,
    SvddError,
    UsageError,
)
from .kernel import kernel_value, spd_solve, squared_distances
from .landmarks import LandmarkSet, kmeans, select_landmarks
from .svdd import Position, SvddModel, TrainConfig, classify_training_points, score, score_batch, train_svdd
from .trace import BandwidthSearchConfig, TraceProfile, build_context, select_bandwidth_trace

__version__ = "0.1.0"

__all__ = [
    "BandwidthSearchConfig",
    "BracketError",
    "DataError",
    "DegenerateGeometryError",
    "InsufficientDataError",
    "LandmarkSet",
    "NonConvergence",
    "NumericalError",
    "Position",
    "SvddError",
    "SvddModel",
    "TraceProfile",
    "TrainConfig",
    "UsageError",
    "build_context",
    "classify_training_points",
    "kernel_value",
    "kmeans",
    "score",
    "score_batch",
    "select_bandwidth_trace",
    "select_landmarks",
    "spd_solve",
    "squared_distances",
    "train_svdd",
]
