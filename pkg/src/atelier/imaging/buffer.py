"""Core raster type: a rectangular sample array plus its interpretation.

All pixel data lives in a numpy array of shape (height, width, channels),
row-major and channel-interleaved. Integer depths store device values
(0..255 / 0..65535); F32 stores normalized values in [0, 1]. Arithmetic
everywhere in this package happens in float32 on normalized values and is
rounded half-to-even when written back to an integer depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import AlphaModeViolation, LayoutMismatch, OutOfBounds, ZeroDimension


class Layout(Enum):
    RGB = "rgb"
    RGBA = "rgba"
    LUMA = "luma"

    @property
    def channels(self) -> int:
        return {Layout.RGB: 3, Layout.RGBA: 4, Layout.LUMA: 1}[self]


class Depth(Enum):
    U8 = "u8"
    U16 = "u16"
    F32 = "f32"

    @property
    def dtype(self) -> np.dtype:
        return {Depth.U8: np.dtype(np.uint8),
                Depth.U16: np.dtype(np.uint16),
                Depth.F32: np.dtype(np.float32)}[self]

    @property
    def max_value(self) -> float:
        return {Depth.U8: 255.0, Depth.U16: 65535.0, Depth.F32: 1.0}[self]


class AlphaMode(Enum):
    STRAIGHT = "straight"
    PREMULTIPLIED = "premultiplied"
    NONE = "none"


@dataclass
class ImageBuffer:
    """A width x height raster with an explicit layout, depth and alpha mode.

    Invariants (checked on construction):
      * pixels.shape == (height, width, layout.channels)
      * pixels.dtype matches depth
      * alpha_mode is NONE exactly when layout is not RGBA
    """

    pixels: np.ndarray
    layout: Layout
    depth: Depth
    alpha_mode: AlphaMode

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3:
            raise LayoutMismatch(f"pixel array must be 2- or 3-dimensional, got shape {px.shape}")
        h, w, c = px.shape
        if w <= 0 or h <= 0:
            raise ZeroDimension(f"image dimensions must be positive, got {w}x{h}")
        if c != self.layout.channels:
            raise LayoutMismatch(
                f"layout {self.layout.value} needs {self.layout.channels} channels, array has {c}")
        if px.dtype != self.depth.dtype:
            raise LayoutMismatch(
                f"depth {self.depth.value} needs dtype {self.depth.dtype}, array has {px.dtype}")
        if (self.alpha_mode == AlphaMode.NONE) != (self.layout != Layout.RGBA):
            raise AlphaModeViolation(
                f"alpha_mode {self.alpha_mode.value} is inconsistent with layout {self.layout.value}")
        self.pixels = px

    # -- geometry -----------------------------------------------------------

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    # -- constructors ---------------------------------------------------------

    @classmethod
    def new(cls, width: int, height: int, layout: Layout, depth: Depth = Depth.U8,
            alpha_mode: AlphaMode | None = None, fill: float = 0.0) -> "ImageBuffer":
        """Allocate a buffer filled with a constant device value."""
        if width <= 0 or height <= 0:
            raise ZeroDimension(f"image dimensions must be positive, got {width}x{height}")
        if alpha_mode is None:
            alpha_mode = AlphaMode.STRAIGHT if layout == Layout.RGBA else AlphaMode.NONE
        px = np.full((height, width, layout.channels), fill, dtype=depth.dtype)
        return cls(px, layout, depth, alpha_mode)

    @classmethod
    def from_array(cls, array: np.ndarray, alpha_mode: AlphaMode | None = None) -> "ImageBuffer":
        """Wrap a numpy array, inferring layout and depth from its shape/dtype."""
        arr = np.asarray(array)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        channels = arr.shape[2]
        layout = {1: Layout.LUMA, 3: Layout.RGB, 4: Layout.RGBA}.get(channels)
        if layout is None:
            raise LayoutMismatch(f"cannot infer layout from {channels} channels")
        depth = {np.dtype(np.uint8): Depth.U8,
                 np.dtype(np.uint16): Depth.U16,
                 np.dtype(np.float32): Depth.F32}.get(arr.dtype)
        if depth is None:
            raise LayoutMismatch(f"unsupported dtype {arr.dtype}")
        if alpha_mode is None:
            alpha_mode = AlphaMode.STRAIGHT if layout == Layout.RGBA else AlphaMode.NONE
        return cls(arr, layout, depth, alpha_mode)

    # -- conversions ----------------------------------------------------------

    def to_f32(self) -> np.ndarray:
        """Pixels as float32 normalized to [0, 1]. Copies unless already F32."""
        if self.depth == Depth.F32:
            return self.pixels
        return self.pixels.astype(np.float32) / np.float32(self.depth.max_value)

    def with_f32(self, values: np.ndarray) -> "ImageBuffer":
        """Store normalized float32 values back at this buffer's depth."""
        return ImageBuffer(quantize(values, self.depth), self.layout, self.depth, self.alpha_mode)

    def convert_depth(self, depth: Depth) -> "ImageBuffer":
        if depth == self.depth:
            return self.copy()
        return ImageBuffer(quantize(self.to_f32(), depth), self.layout, depth, self.alpha_mode)

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.pixels.copy(), self.layout, self.depth, self.alpha_mode)

    # -- validation -----------------------------------------------------------

    def validate_premultiplied(self) -> None:
        """Check the premultiplied invariant: every color sample <= alpha sample."""
        if self.alpha_mode != AlphaMode.PREMULTIPLIED:
            return
        f = self.to_f32()
        if np.any(f[:, :, :3] > f[:, :, 3:4] + 1e-6):
            raise AlphaModeViolation("premultiplied buffer has color samples above alpha")


def quantize(values: np.ndarray, depth: Depth) -> np.ndarray:
    """Normalized float32 -> storage dtype, clipping and rounding half-to-even."""
    v = np.clip(values, 0.0, 1.0)
    if depth == Depth.F32:
        return v.astype(np.float32, copy=False)
    scaled = v.astype(np.float32) * np.float32(depth.max_value)
    return np.rint(scaled).astype(depth.dtype)


def premultiply(img: ImageBuffer) -> ImageBuffer:
    """Straight-alpha RGBA -> premultiplied, computed in F32."""
    _require_rgba(img)
    if img.alpha_mode == AlphaMode.PREMULTIPLIED:
        return img
    f = img.to_f32().copy()
    f[:, :, :3] *= f[:, :, 3:4]
    return ImageBuffer(quantize(f, img.depth), Layout.RGBA, img.depth, AlphaMode.PREMULTIPLIED)


def unpremultiply(img: ImageBuffer, eps: float | None = None) -> ImageBuffer:
    """Premultiplied RGBA -> straight alpha.

    Where alpha <= eps (default: one 8-bit LSB) the color is undefined and
    normalized to black.
    """
    _require_rgba(img)
    if img.alpha_mode == AlphaMode.STRAIGHT:
        return img
    if eps is None:
        eps = 1.0 / 255.0
    f = img.to_f32().copy()
    a = f[:, :, 3:4]
    safe = a > eps
    with np.errstate(divide="ignore", invalid="ignore"):
        f[:, :, :3] = np.where(safe, f[:, :, :3] / np.where(safe, a, 1.0), 0.0)
    return ImageBuffer(quantize(f, img.depth), Layout.RGBA, img.depth, AlphaMode.STRAIGHT)


def _require_rgba(img: ImageBuffer) -> None:
    if img.layout != Layout.RGBA:
        raise LayoutMismatch(f"operation requires RGBA, got {img.layout.value}")


def check_rect(img: ImageBuffer, x: int, y: int, w: int, h: int) -> None:
    if w <= 0 or h <= 0:
        raise ZeroDimension(f"rectangle dimensions must be positive, got {w}x{h}")
    if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise OutOfBounds(
            f"rectangle ({x},{y},{w},{h}) is outside image {img.width}x{img.height}")
