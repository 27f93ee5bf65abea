"""Alpha-safe geometric and photometric augmentation.

Geometry resamples color in premultiplied space with alpha run through the
same bilinear kernel, then unpremultiplies; the canvas grows so rotation
and scale never clip content. Photometric ops (jitter, grain) touch RGB
only — the alpha channel passes through bit-exact. Flips are pure sample
permutations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import SpecOutOfBounds
from ..imaging import (AlphaMode, Depth, ImageBuffer, Layout,
                       brightness_contrast, flip_horizontal, flip_vertical,
                       premultiply, rotate90, unpremultiply)
from ..imaging.buffer import quantize
from .assets import StencilAsset

ROTATION_LIMIT_DEG = 15.0
SCALE_LIMITS = (0.85, 1.15)
JITTER_LIMIT = 0.10


@dataclass(frozen=True)
class AugmentSpec:
    hflip: bool = False
    vflip: bool = False
    rotation_deg: float = 0.0
    scale_factor: float = 1.0
    brightness: float = 0.0
    contrast: float = 0.0
    grain_sigma: float = 0.0      # 8-bit LSB units, RGB only
    seed: int = 0

    def validate(self) -> None:
        if abs(self.rotation_deg) > ROTATION_LIMIT_DEG:
            raise SpecOutOfBounds(
                f"rotation {self.rotation_deg} exceeds +-{ROTATION_LIMIT_DEG} degrees")
        if not (SCALE_LIMITS[0] <= self.scale_factor <= SCALE_LIMITS[1]):
            raise SpecOutOfBounds(
                f"scale {self.scale_factor} outside [{SCALE_LIMITS[0]}, {SCALE_LIMITS[1]}]")
        if max(abs(self.brightness), abs(self.contrast)) > JITTER_LIMIT:
            raise SpecOutOfBounds(f"jitter exceeds +-{JITTER_LIMIT:.0%}")
        if self.grain_sigma < 0:
            raise SpecOutOfBounds("grain_sigma must be >= 0")

    @property
    def is_geometric_identity(self) -> bool:
        return self.rotation_deg == 0.0 and self.scale_factor == 1.0


def alpha_safe_transform(asset: StencilAsset, spec: AugmentSpec) -> StencilAsset:
    spec.validate()
    img = asset.image
    if spec.hflip:
        img = flip_horizontal(img)
    if spec.vflip:
        img = flip_vertical(img)
    if not spec.is_geometric_identity:
        img = rotate_scale(img, spec.rotation_deg, spec.scale_factor)
    if spec.brightness != 0.0 or spec.contrast != 0.0:
        img = brightness_contrast(img, spec.brightness, spec.contrast, rgb_only=True)
    if spec.grain_sigma > 0.0:
        img = add_grain(img, spec.grain_sigma, spec.seed)
    return asset.with_image(img)


def rotate_scale(img: ImageBuffer, rotation_deg: float, scale: float) -> ImageBuffer:
    """Rotate/scale about the center onto an auto-grown transparent canvas.

    Color is resampled premultiplied with a bilinear kernel (no negative
    lobes, so alpha can never appear where no input alpha was in support),
    then unpremultiplied.
    """
    pre = premultiply(img).to_f32()
    h, w = pre.shape[:2]
    theta = math.radians(rotation_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    out_w = max(1, math.ceil(scale * (w * abs(cos_t) + h * abs(sin_t)) - 1e-9))
    out_h = max(1, math.ceil(scale * (w * abs(sin_t) + h * abs(cos_t)) - 1e-9))

    # inverse map output pixel centers into source pixel-center coordinates
    yo, xo = np.meshgrid(np.arange(out_h, dtype=np.float64),
                         np.arange(out_w, dtype=np.float64), indexing="ij")
    dx = xo + 0.5 - out_w / 2.0
    dy = yo + 0.5 - out_h / 2.0
    sx = (cos_t * dx + sin_t * dy) / scale + w / 2.0
    sy = (-sin_t * dx + cos_t * dy) / scale + h / 2.0

    out = _bilinear_zero_pad(pre, sx, sy)
    premul = ImageBuffer(quantize(out, img.depth), Layout.RGBA, img.depth,
                         AlphaMode.PREMULTIPLIED)
    return unpremultiply(premul)


def _bilinear_zero_pad(values: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Bilinear sampling; coordinates outside the source read as transparent."""
    h, w = values.shape[:2]
    ux, uy = sx - 0.5, sy - 0.5
    x0 = np.floor(ux).astype(np.int64)
    y0 = np.floor(uy).astype(np.int64)
    fx = (ux - x0).astype(np.float32)
    fy = (uy - y0).astype(np.float32)

    out = np.zeros((*sx.shape, values.shape[2]), dtype=np.float32)
    for dy_tap, dx_tap, wgt in (
            (0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)),
            (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
        xs, ys = x0 + dx_tap, y0 + dy_tap
        valid = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        tap = values[np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1), :]
        out += np.where(valid[..., None], tap * wgt[..., None], 0.0)
    return out


def add_grain(img: ImageBuffer, sigma_lsb: float, seed: int) -> ImageBuffer:
    """Seeded Gaussian grain on RGB; alpha passes through bit-exact."""
    rng = np.random.default_rng(seed)
    f = img.to_f32().copy()
    noise = rng.normal(0.0, sigma_lsb / 255.0, f[:, :, :3].shape).astype(np.float32)
    f[:, :, :3] += noise
    out = quantize(f, img.depth)
    out[:, :, 3] = img.pixels[:, :, 3]
    return ImageBuffer(out, img.layout, img.depth, img.alpha_mode)


def exact_rotate90(asset: StencilAsset, quarter_turns: int) -> StencilAsset:
    """90-degree rotation as a pure permutation (no resampling)."""
    return asset.with_image(rotate90(asset.image, quarter_turns))
