"""Grasp planning from single depth images via depth-edge pairs."""

__version__ = "0.1.0"

from .camera import CameraModel  # noqa: E402
from .config import ConfigError, PipelineConfig  # noqa: E402
from .imaging import DepthImage, compute_gradients, fill_shadows, load_depth  # noqa: E402

__all__ = ["CameraModel", "ConfigError", "PipelineConfig", "DepthImage", "compute_gradients",
           "fill_shadows", "load_depth", "__version__"]
