"""Aligned augmentation of HR/LR pairs.

Geometric ops are explicit flags applied identically to both halves so
they stay pixel-aligned; photometric jitter is sampled from configured
ranges under the seed and applied with identical parameters to both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import JitterOutOfBounds, LayoutMismatch
from ..imaging import brightness_contrast, flip_horizontal, flip_vertical, rotate90
from .stream import TrainingPair

JITTER_HARD_BOUND = 0.20


@dataclass(frozen=True)
class PairAugmentOps:
    hflip: bool = False
    vflip: bool = False
    quarter_turns: int = 0                       # 90-degree multiples, CCW
    brightness_range: tuple[float, float] = (0.0, 0.0)
    contrast_range: tuple[float, float] = (0.0, 0.0)

    def validate(self) -> None:
        for name, (lo, hi) in (("brightness_range", self.brightness_range),
                               ("contrast_range", self.contrast_range)):
            if lo > hi:
                raise JitterOutOfBounds(f"{name} is not ordered: {lo} > {hi}")
            if max(abs(lo), abs(hi)) > JITTER_HARD_BOUND:
                raise JitterOutOfBounds(
                    f"{name} exceeds the +-{JITTER_HARD_BOUND:.0%} hard bound")


def augment_pair(pair: TrainingPair, ops: PairAugmentOps, seed: int) -> TrainingPair:
    ops.validate()
    if ops.quarter_turns % 2 and pair.hr.width != pair.hr.height:
        raise LayoutMismatch("odd 90-degree rotations require square patches")

    rng = np.random.default_rng(seed)
    brightness = float(rng.uniform(*ops.brightness_range))
    contrast = float(rng.uniform(*ops.contrast_range))

    hr, lr = pair.hr, pair.lr
    if ops.hflip:
        hr, lr = flip_horizontal(hr), flip_horizontal(lr)
    if ops.vflip:
        hr, lr = flip_vertical(hr), flip_vertical(lr)
    if ops.quarter_turns % 4:
        hr = rotate90(hr, ops.quarter_turns)
        lr = rotate90(lr, ops.quarter_turns)
    if brightness != 0.0 or contrast != 0.0:
        hr = brightness_contrast(hr, brightness, contrast)
        lr = brightness_contrast(lr, brightness, contrast)
    return TrainingPair(hr, lr, pair.provenance)
