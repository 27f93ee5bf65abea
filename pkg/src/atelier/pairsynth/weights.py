"""Detail-weighted patch position maps.

A WeightMap assigns every valid top-left patch position a probability
proportional to the summed Laplacian magnitude inside its window, with an
optional hard mask and an epsilon floor so flat-but-unmasked regions stay
reachable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import AllMasked, EmptyWeightMap, LayoutMismatch, PatchLargerThanImage
from ..imaging import ImageBuffer, Layout, laplacian_magnitude

EPSILON_FLOOR = 1e-8  # fraction of total detail mass added to unmasked positions


@dataclass
class WeightMap:
    """Categorical distribution over valid top-left patch positions."""

    width: int            # source width - patch + 1
    height: int
    patch: int
    weights: np.ndarray   # (height, width) float32, nonnegative, sums to 1
    _cumulative: np.ndarray | None = field(default=None, repr=False)

    @property
    def cumulative(self) -> np.ndarray:
        """Float64 cumulative mass over row-major positions, cached."""
        if self._cumulative is None:
            cum = np.cumsum(self.weights.ravel(), dtype=np.float64)
            self._cumulative = cum / cum[-1]
        return self._cumulative

    def total(self) -> float:
        return float(self.weights.sum(dtype=np.float64))


def _window_sums(values: np.ndarray, patch: int) -> np.ndarray:
    """Sum of `values` over every patch x patch window, via integral image."""
    s = np.zeros((values.shape[0] + 1, values.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(values, axis=0, dtype=np.float64), axis=1, out=s[1:, 1:])
    return (s[patch:, patch:] - s[:-patch, patch:]
            - s[patch:, :-patch] + s[:-patch, :-patch])


def build_weight_map(img: ImageBuffer, patch: int,
                     mask: ImageBuffer | None = None) -> WeightMap:
    """Weight positions by windowed Laplacian mass, gated by an optional mask.

    A position is masked out when its window contains no nonzero mask pixel;
    masked positions get weight exactly 0 and are never sampled.
    """
    if patch <= 0:
        raise PatchLargerThanImage(f"patch size must be positive, got {patch}")
    if img.width < patch or img.height < patch:
        raise PatchLargerThanImage(
            f"patch {patch} exceeds source {img.width}x{img.height}")

    lap = laplacian_magnitude(img).pixels[:, :, 0]
    win = _window_sums(lap, patch)

    if mask is not None:
        if mask.layout != Layout.LUMA:
            raise LayoutMismatch("mask must be a Luma image")
        if (mask.width, mask.height) != (img.width, img.height):
            raise LayoutMismatch(
                f"mask {mask.width}x{mask.height} does not match image "
                f"{img.width}x{img.height}")
        mask_win = _window_sums((mask.to_f32()[:, :, 0] > 0).astype(np.float64), patch)
        gate = mask_win > 0
        if not gate.any():
            raise AllMasked("mask removes every patch position")
    else:
        gate = np.ones_like(win, dtype=bool)

    w = np.where(gate, win, 0.0)
    mass = w.sum()
    if mass <= 0.0:
        # flat source: uniform over unmasked positions
        w = gate.astype(np.float64)
    else:
        w = w + (EPSILON_FLOOR * mass) * gate
    w /= w.sum()
    wf = w.astype(np.float32)
    wf /= np.float32(wf.sum(dtype=np.float64))
    return WeightMap(win.shape[1], win.shape[0], patch, wf)


def draw_positions(wmap: WeightMap, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. row-major position indices from the wmap categorical."""
    if wmap.total() <= 0.0:
        raise EmptyWeightMap("weight map carries no probability mass")
    cum = wmap.cumulative
    idx = np.searchsorted(cum, rng.random(n), side="right")
    return np.minimum(idx, cum.size - 1)
