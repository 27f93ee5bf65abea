"""atelier: streaming tiled image refinement, SR pair synthesis, and asset tooling."""

__version__ = "0.1.0"

from . import errors
from .imaging import AlphaMode, Depth, ImageBuffer, Layout, ResampleFilter

__all__ = ["errors", "ImageBuffer", "Layout", "Depth", "AlphaMode",
           "ResampleFilter", "__version__"]
