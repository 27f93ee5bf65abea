"""Core raster types and pure pixel operations."""

from .buffer import (AlphaMode, Depth, ImageBuffer, Layout, premultiply,
                     quantize, unpremultiply)
from .ops import (brightness_contrast, composite_over, crop, flip_horizontal,
                  flip_vertical, gaussian_blur, laplacian_magnitude, paste,
                  rotate90, to_luma)
from .png import (PngInfo, PngRowReader, PngRowWriter, decode_png, encode_png,
                  read_png_header)
from .resample import ResampleFilter, resample

__all__ = [
    "AlphaMode", "Depth", "ImageBuffer", "Layout",
    "premultiply", "unpremultiply", "quantize",
    "resample", "ResampleFilter",
    "to_luma", "laplacian_magnitude", "crop", "paste", "composite_over",
    "gaussian_blur", "flip_horizontal", "flip_vertical", "rotate90",
    "brightness_contrast",
    "decode_png", "encode_png", "read_png_header",
    "PngInfo", "PngRowReader", "PngRowWriter",
]
