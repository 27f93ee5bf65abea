"""Pure pixel operations: luma, Laplacian response, crop, compositing, blur.

All math runs in float32 on normalized values; integer depths are rounded
half-to-even on the way back out. Convolutions replicate edges.
"""

from __future__ import annotations

import numpy as np

from ..errors import LayoutMismatch
from .buffer import (AlphaMode, Depth, ImageBuffer, Layout, check_rect,
                     premultiply, quantize, unpremultiply)

# Rec.709 luma weights for sRGB-encoded samples.
LUMA_R, LUMA_G, LUMA_B = np.float32(0.2126), np.float32(0.7152), np.float32(0.0722)


def to_luma(img: ImageBuffer) -> ImageBuffer:
    """Reduce RGB/RGBA to single-channel luma at the same depth. Alpha is ignored."""
    if img.layout == Layout.LUMA:
        return img.copy()
    f = img.to_f32()
    luma = (LUMA_R * f[:, :, 0] + LUMA_G * f[:, :, 1]) + LUMA_B * f[:, :, 2]
    return ImageBuffer(quantize(luma[:, :, None], img.depth), Layout.LUMA, img.depth,
                       AlphaMode.NONE)


def laplacian_magnitude(img: ImageBuffer) -> ImageBuffer:
    """Per-pixel |laplacian| with the 3x3 cross kernel and replicated edges.

    Kernel is [0,1,0; 1,-4,1; 0,1,0]; non-Luma input is reduced to luma
    first. Output is always Luma/F32 and nonnegative.
    """
    luma = to_luma(img) if img.layout != Layout.LUMA else img
    f = luma.to_f32()[:, :, 0]
    p = np.pad(f, 1, mode="edge")
    # accumulate in the kernel's row-major order: up, left, center, right, down
    acc = p[:-2, 1:-1] + p[1:-1, :-2]
    acc = acc + np.float32(-4.0) * p[1:-1, 1:-1]
    acc = acc + p[1:-1, 2:]
    acc = acc + p[2:, 1:-1]
    out = np.abs(acc)
    return ImageBuffer(out[:, :, None], Layout.LUMA, Depth.F32, AlphaMode.NONE)


def crop(img: ImageBuffer, x: int, y: int, w: int, h: int) -> ImageBuffer:
    """Copy the w x h rectangle at (x, y). The rectangle must lie inside the image."""
    check_rect(img, x, y, w, h)
    out = img.pixels[y:y + h, x:x + w, :].copy()
    return ImageBuffer(out, img.layout, img.depth, img.alpha_mode)


def paste(dst: ImageBuffer, src: ImageBuffer, x: int, y: int) -> ImageBuffer:
    """Overwrite the src-sized rectangle at (x, y) with src's samples."""
    if src.layout != dst.layout or src.depth != dst.depth:
        raise LayoutMismatch("paste requires matching layout and depth")
    check_rect(dst, x, y, src.width, src.height)
    out = dst.pixels.copy()
    out[y:y + src.height, x:x + src.width, :] = src.pixels
    return ImageBuffer(out, dst.layout, dst.depth, dst.alpha_mode)


def composite_over(dst: ImageBuffer, src: ImageBuffer, x: int, y: int) -> ImageBuffer:
    """Porter-Duff "over": src placed at (x, y), clipped to dst bounds.

    Both buffers must be straight-alpha RGBA. The blend itself runs in
    premultiplied float32; the result comes back straight-alpha at dst's
    depth. Pixels outside the src footprint are untouched. Where the result
    alpha is at most one 8-bit LSB the color is undefined and dst's color is
    kept, so a fully transparent src is a bit-exact no-op.
    """
    for name, buf in (("dst", dst), ("src", src)):
        if buf.layout != Layout.RGBA or buf.alpha_mode != AlphaMode.STRAIGHT:
            raise LayoutMismatch(f"composite_over requires straight-alpha RGBA {name}")

    # clip the src footprint to the destination
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + src.width, dst.width), min(y + src.height, dst.height)
    if x0 >= x1 or y0 >= y1:
        return dst.copy()

    out = dst.pixels.copy()
    s = src.to_f32()[y0 - y:y1 - y, x0 - x:x1 - x, :]
    d = dst.to_f32()[y0:y1, x0:x1, :]

    sa, da = s[:, :, 3:4], d[:, :, 3:4]
    one_minus_sa = np.float32(1.0) - sa
    out_a = sa + da * one_minus_sa
    out_rgb_prem = s[:, :, :3] * sa + d[:, :, :3] * (da * one_minus_sa)

    # where the result is (near) fully transparent the color is undefined;
    # keep dst's color so a transparent src is a bit-exact no-op
    safe = out_a > np.float32(1.0 / 255.0)
    out_rgb = np.where(safe, out_rgb_prem / np.where(safe, out_a, 1.0), d[:, :, :3])
    merged = np.concatenate([out_rgb, out_a], axis=2)
    out[y0:y1, x0:x1, :] = quantize(merged, dst.depth)
    return ImageBuffer(out, Layout.RGBA, dst.depth, AlphaMode.STRAIGHT)


def gaussian_blur(img: ImageBuffer, sigma: float) -> ImageBuffer:
    """Separable isotropic Gaussian blur, replicate-padded. sigma <= 0 is identity."""
    if sigma <= 0:
        return img.copy()
    values = img.to_f32()
    if img.layout == Layout.RGBA and img.alpha_mode != AlphaMode.PREMULTIPLIED:
        # blur of straight RGBA would smear undefined colors; caller converts
        raise LayoutMismatch("gaussian_blur on RGBA requires premultiplied alpha")
    kernel = _gaussian_kernel(sigma)
    values = _convolve_axis(values, kernel, axis=1)
    values = _convolve_axis(values, kernel, axis=0)
    return ImageBuffer(quantize(values, img.depth), img.layout, img.depth, img.alpha_mode)


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(np.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return (k / k.sum()).astype(np.float32)


def _convolve_axis(values: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0), (0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    p = np.pad(values, pad, mode="edge")
    out = np.zeros_like(values)
    for k, kv in enumerate(kernel):
        if axis == 0:
            out += kv * p[k:k + values.shape[0], :, :]
        else:
            out += kv * p[:, k:k + values.shape[1], :]
    return out


def flip_horizontal(img: ImageBuffer) -> ImageBuffer:
    """Exact left-right mirror; a pure sample permutation."""
    return ImageBuffer(np.ascontiguousarray(img.pixels[:, ::-1, :]),
                       img.layout, img.depth, img.alpha_mode)


def flip_vertical(img: ImageBuffer) -> ImageBuffer:
    """Exact top-bottom mirror; a pure sample permutation."""
    return ImageBuffer(np.ascontiguousarray(img.pixels[::-1, :, :]),
                       img.layout, img.depth, img.alpha_mode)


def rotate90(img: ImageBuffer, quarter_turns: int) -> ImageBuffer:
    """Exact rotation by 90-degree multiples (counterclockwise); a permutation."""
    k = quarter_turns % 4
    return ImageBuffer(np.ascontiguousarray(np.rot90(img.pixels, k, axes=(0, 1))),
                       img.layout, img.depth, img.alpha_mode)


def brightness_contrast(img: ImageBuffer, brightness: float = 0.0,
                        contrast: float = 0.0, rgb_only: bool = False) -> ImageBuffer:
    """Photometric jitter: multiply by (1+brightness), scale around mid-gray by (1+contrast).

    With rgb_only, alpha samples are passed through bit-exactly.
    """
    f = img.to_f32().copy()
    color = f[:, :, :3] if (rgb_only and img.layout == Layout.RGBA) else f
    color *= np.float32(1.0 + brightness)
    if contrast != 0.0:
        mid = np.float32(0.5)
        color -= mid
        color *= np.float32(1.0 + contrast)
        color += mid
    if rgb_only and img.layout == Layout.RGBA:
        out = quantize(f, img.depth)
        out[:, :, 3] = img.pixels[:, :, 3]  # alpha untouched, bit-exact
    else:
        out = quantize(f, img.depth)
    return ImageBuffer(out, img.layout, img.depth, img.alpha_mode)


__all__ = [
    "to_luma", "laplacian_magnitude", "crop", "paste", "composite_over",
    "gaussian_blur", "flip_horizontal", "flip_vertical", "rotate90",
    "brightness_contrast", "premultiply", "unpremultiply",
]
