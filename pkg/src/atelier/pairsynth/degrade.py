"""The four-stage degradation pipeline: blur, noise, downsample, JPEG.

Stage parameters are drawn uniformly from configured ranges under a seed
and returned alongside the result, so any LR patch can be regenerated
bit-exactly from its provenance. Quality 100 skips the JPEG stage entirely
(treating it as the identity), which makes the neutral configuration an
exact classical downsample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from ..errors import LayoutMismatch, NotDivisibleByScale
from ..imaging import Depth, ImageBuffer, Layout, ResampleFilter, gaussian_blur, resample
from ..imaging.buffer import quantize

STAGES = ("blur", "noise", "downsample", "jpeg")

DEFAULT_FILTERS = (ResampleFilter.NEAREST, ResampleFilter.BILINEAR,
                   ResampleFilter.BICUBIC)


@dataclass(frozen=True)
class DegradationConfig:
    blur_sigma_range: tuple[float, float] = (0.2, 3.0)
    noise_sigma_range: tuple[float, float] = (0.0, 10.0)  # 8-bit LSB units
    scale: int = 4
    downsample_filters: tuple[ResampleFilter, ...] = DEFAULT_FILTERS
    jpeg_quality_range: tuple[int, int] = (30, 95)
    stage_order: tuple[str, ...] = STAGES

    def validate(self) -> None:
        for name, (lo, hi) in (("blur_sigma_range", self.blur_sigma_range),
                               ("noise_sigma_range", self.noise_sigma_range),
                               ("jpeg_quality_range", self.jpeg_quality_range)):
            if lo > hi:
                raise ValueError(f"{name} is not ordered: {lo} > {hi}")
        if self.scale < 2:
            raise ValueError(f"scale must be >= 2, got {self.scale}")
        qlo, qhi = self.jpeg_quality_range
        if qlo < 1 or qhi > 100:
            raise ValueError(f"jpeg quality range must lie in [1,100], got {qlo}..{qhi}")
        if sorted(self.stage_order) != sorted(STAGES):
            raise ValueError(f"stage_order must be a permutation of {STAGES}")
        if not self.downsample_filters:
            raise ValueError("downsample_filters must not be empty")


def neutral_config(scale: int = 4) -> DegradationConfig:
    """No blur, no noise, bicubic downsample, JPEG disabled."""
    return DegradationConfig(blur_sigma_range=(0.0, 0.0),
                             noise_sigma_range=(0.0, 0.0),
                             scale=scale,
                             downsample_filters=(ResampleFilter.BICUBIC,),
                             jpeg_quality_range=(100, 100))


@dataclass(frozen=True)
class DegradationParams:
    blur_sigma: float
    noise_sigma: float
    filter: ResampleFilter
    jpeg_quality: int
    noise_seed: int

    def to_dict(self) -> dict:
        return {"blur_sigma": self.blur_sigma, "noise_sigma": self.noise_sigma,
                "filter": self.filter.value, "jpeg_quality": self.jpeg_quality,
                "noise_seed": self.noise_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationParams":
        return cls(float(d["blur_sigma"]), float(d["noise_sigma"]),
                   ResampleFilter(d["filter"]), int(d["jpeg_quality"]),
                   int(d["noise_seed"]))


def sample_params(cfg: DegradationConfig, rng: np.random.Generator) -> DegradationParams:
    """Draw one stage-parameter set; consumes a fixed number of rng values."""
    blur = float(rng.uniform(*cfg.blur_sigma_range))
    noise = float(rng.uniform(*cfg.noise_sigma_range))
    filt = cfg.downsample_filters[int(rng.integers(len(cfg.downsample_filters)))]
    qlo, qhi = cfg.jpeg_quality_range
    quality = int(rng.integers(qlo, qhi + 1))
    noise_seed = int(rng.integers(0, 2**63))
    return DegradationParams(blur, noise, filt, quality, noise_seed)


def degrade(hr: ImageBuffer, cfg: DegradationConfig, seed: int):
    """HR patch -> (LR patch, sampled parameters)."""
    cfg.validate()
    params = sample_params(cfg, np.random.default_rng(seed))
    return degrade_with_params(hr, cfg, params), params


def degrade_with_params(hr: ImageBuffer, cfg: DegradationConfig,
                        params: DegradationParams) -> ImageBuffer:
    """Replay the pipeline with explicit parameters (provenance path)."""
    if hr.layout == Layout.RGBA:
        raise LayoutMismatch("degradation operates on flattened RGB or Luma input")
    if hr.width % cfg.scale or hr.height % cfg.scale:
        raise NotDivisibleByScale(
            f"{hr.width}x{hr.height} is not divisible by scale {cfg.scale}")

    img = hr
    for stage in cfg.stage_order:
        if stage == "blur" and params.blur_sigma > 0:
            img = gaussian_blur(img, params.blur_sigma)
        elif stage == "noise" and params.noise_sigma > 0:
            img = _add_noise(img, params.noise_sigma, params.noise_seed)
        elif stage == "downsample":
            img = resample(img, hr.width // cfg.scale, hr.height // cfg.scale,
                           params.filter)
        elif stage == "jpeg" and params.jpeg_quality < 100:
            img = jpeg_roundtrip(img, params.jpeg_quality)
    return img


def _add_noise(img: ImageBuffer, sigma_lsb: float, noise_seed: int) -> ImageBuffer:
    rng = np.random.default_rng(noise_seed)
    noise = rng.normal(0.0, sigma_lsb / 255.0, img.pixels.shape).astype(np.float32)
    return img.with_f32(img.to_f32() + noise)


def jpeg_roundtrip(img: ImageBuffer, quality: int) -> ImageBuffer:
    """Encode/decode through JPEG at the given quality.

    JPEG is defined on 8-bit samples: other depths are quantized to U8 for
    the round trip and promoted back afterwards.
    """
    if img.layout == Layout.RGBA:
        raise LayoutMismatch("JPEG has no alpha channel")
    work = img if img.depth == Depth.U8 else img.convert_depth(Depth.U8)
    if work.layout == Layout.RGB:
        raw = np.ascontiguousarray(work.pixels[:, :, ::-1])
    else:
        raw = work.pixels[:, :, 0]
    ok, blob = cv2.imencode(".jpg", raw, [cv2.IMWRITE_JPEG_QUALITY, int(quality)])
    if not ok:
        raise LayoutMismatch("JPEG encode failed")
    arr = cv2.imdecode(blob, cv2.IMREAD_UNCHANGED)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    elif arr.shape[2] == 3:
        arr = np.ascontiguousarray(arr[:, :, ::-1])
    out = ImageBuffer(arr, work.layout, Depth.U8, work.alpha_mode)
    return out if img.depth == Depth.U8 else out.convert_depth(img.depth)
