"""Separable convolution resampling: nearest, bilinear, bicubic, Lanczos3.

Bicubic uses the Catmull-Rom (a = -0.5) kernel. Downscaling widens the
kernel by the inverse scale so it antialiases. Edges replicate. Per-pixel
weights are normalized so constants map to constants.

Tap accumulation pairs the k-th and (K-1-k)-th taps before summing. The
kernel is even and the sampling grid is symmetric, so a mirrored input
yields the bit-exact mirror of the output — a property the training-pair
alignment invariants rely on.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from ..errors import AlphaModeViolation, ZeroDimension
from .buffer import AlphaMode, Depth, ImageBuffer, Layout, quantize


class ResampleFilter(Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"
    LANCZOS3 = "lanczos3"


_SUPPORT = {
    ResampleFilter.BILINEAR: 1.0,
    ResampleFilter.BICUBIC: 2.0,
    ResampleFilter.LANCZOS3: 3.0,
}


def _kernel(filt: ResampleFilter, x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    if filt == ResampleFilter.BILINEAR:
        return np.maximum(0.0, 1.0 - ax)
    if filt == ResampleFilter.BICUBIC:
        # Catmull-Rom: a = -0.5
        a = -0.5
        ax2, ax3 = ax * ax, ax * ax * ax
        inner = (a + 2) * ax3 - (a + 3) * ax2 + 1
        outer = a * ax3 - 5 * a * ax2 + 8 * a * ax - 4 * a
        return np.where(ax <= 1.0, inner, np.where(ax < 2.0, outer, 0.0))
    if filt == ResampleFilter.LANCZOS3:
        out = np.sinc(ax) * np.sinc(ax / 3.0)
        return np.where(ax < 3.0, out, 0.0)
    raise ValueError(f"no kernel for {filt}")


def axis_taps(in_size: int, out_size: int, filt: ResampleFilter):
    """Tap indices and normalized weights for one axis.

    Returns (idx, w): int arrays of shape (out_size, K) with idx clamped to
    the source range (replicate padding) and w rows summing to 1.
    """
    scale = out_size / in_size
    filterscale = max(1.0, 1.0 / scale)
    support = _SUPPORT[filt] * filterscale

    centers = (np.arange(out_size, dtype=np.float64) + 0.5) / scale - 0.5
    k_count = int(math.ceil(2.0 * support)) + 1
    start = np.ceil(centers - support).astype(np.int64)
    offsets = np.arange(k_count, dtype=np.int64)
    idx = start[:, None] + offsets[None, :]

    w = _kernel(filt, (idx - centers[:, None]) / filterscale)
    # paired summation keeps normalization mirror-symmetric
    total = np.zeros(out_size, dtype=np.float64)
    for k in range(k_count // 2):
        total += w[:, k] + w[:, k_count - 1 - k]
    if k_count % 2:
        total += w[:, k_count // 2]
    w = (w / total[:, None]).astype(np.float32)

    np.clip(idx, 0, in_size - 1, out=idx)
    return idx, w


def _apply_axis(values: np.ndarray, idx: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    """One separable pass over `axis` (0 or 1) of an (H, W, C) float32 array."""
    k_count = idx.shape[1]
    if axis == 1:
        out = np.zeros((values.shape[0], idx.shape[0], values.shape[2]), dtype=np.float32)

        def term(k):
            return values[:, idx[:, k], :] * w[None, :, k, None]
    else:
        out = np.zeros((idx.shape[0], values.shape[1], values.shape[2]), dtype=np.float32)

        def term(k):
            return values[idx[:, k], :, :] * w[:, k, None, None]

    for k in range(k_count // 2):
        out += term(k) + term(k_count - 1 - k)
    if k_count % 2:
        out += term(k_count // 2)
    return out


def _nearest_axis(in_size: int, out_size: int) -> np.ndarray:
    idx = np.floor((np.arange(out_size, dtype=np.float64) + 0.5) * in_size / out_size)
    return np.clip(idx.astype(np.int64), 0, in_size - 1)


def resample(img: ImageBuffer, target_w: int, target_h: int,
             filt: ResampleFilter = ResampleFilter.LANCZOS3) -> ImageBuffer:
    """Resize to (target_w, target_h). RGBA input must be premultiplied."""
    if target_w <= 0 or target_h <= 0:
        raise ZeroDimension(f"target dimensions must be positive, got {target_w}x{target_h}")
    if img.layout == Layout.RGBA and img.alpha_mode != AlphaMode.PREMULTIPLIED:
        raise AlphaModeViolation(
            "RGBA resampling requires premultiplied alpha; convert with premultiply() first")

    if filt == ResampleFilter.NEAREST:
        xs = _nearest_axis(img.width, target_w)
        ys = _nearest_axis(img.height, target_h)
        out = img.pixels[ys[:, None], xs[None, :], :]
        return ImageBuffer(np.ascontiguousarray(out), img.layout, img.depth, img.alpha_mode)

    if target_w == img.width and target_h == img.height:
        return img.copy()

    values = img.to_f32()
    if target_w != img.width:
        idx, w = axis_taps(img.width, target_w, filt)
        values = _apply_axis(values, idx, w, axis=1)
    if target_h != img.height:
        idx, w = axis_taps(img.height, target_h, filt)
        values = _apply_axis(values, idx, w, axis=0)
    return ImageBuffer(quantize(values, img.depth), img.layout, img.depth, img.alpha_mode)


def resample_array_f32(values: np.ndarray, target_w: int, target_h: int,
                       filt: ResampleFilter) -> np.ndarray:
    """Resample a raw (H, W, C) float32 array. Used by streaming stages."""
    if filt == ResampleFilter.NEAREST:
        xs = _nearest_axis(values.shape[1], target_w)
        ys = _nearest_axis(values.shape[0], target_h)
        return np.ascontiguousarray(values[ys[:, None], xs[None, :], :])
    if target_w != values.shape[1]:
        idx, w = axis_taps(values.shape[1], target_w, filt)
        values = _apply_axis(values, idx, w, axis=1)
    if target_h != values.shape[0]:
        idx, w = axis_taps(values.shape[0], target_h, filt)
        values = _apply_axis(values, idx, w, axis=0)
    return values
