"""Sequential sparse-angle fan-beam CT reconstruction and segmentation.

Simulates slice-wise fan-beam scanning of a slowly varying object,
reconstructs the slice sequence with a dimension-reduced Kalman filter
that accumulates angular information along the stack, and segments
density anomalies with a density-peak clustering adapted to image grids.
"""

from ._accel import backend
from .errors import ConfigurationError, FilterBreakdownError, GeometryError, SeqctError

__version__ = "0.1.0"

__all__ = [
    "backend",
    "SeqctError",
    "ConfigurationError",
    "GeometryError",
    "FilterBreakdownError",
    "__version__",
]
