"""Patch sampling and the unbounded training-pair stream.

The stream picks a source uniformly, draws a patch position from the
source's cached weight map, and degrades the patch. Each pair carries
provenance (source id, coords, degradation seed, sampled parameters) that
regenerates it bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptyWeightMap, PatchLargerThanImage
from ..imaging import ImageBuffer, crop, decode_png
from .degrade import DegradationConfig, DegradationParams, degrade_with_params, sample_params
from .weights import WeightMap, build_weight_map, draw_positions


@dataclass(frozen=True)
class Provenance:
    source_id: str
    x: int
    y: int
    seed: int                    # degradation seed for this pair
    params: DegradationParams

    def to_dict(self) -> dict:
        return {"source_id": self.source_id, "x": self.x, "y": self.y,
                "seed": self.seed, "params": self.params.to_dict()}


@dataclass
class TrainingPair:
    hr: ImageBuffer
    lr: ImageBuffer
    provenance: Provenance


def sample_patches(img: ImageBuffer, wmap: WeightMap, n: int, patch: int,
                   seed: int) -> list[tuple[tuple[int, int], ImageBuffer]]:
    """n i.i.d. (coords, HR patch) draws from the weight map, with replacement."""
    if wmap.patch != patch or wmap.width != img.width - patch + 1 \
            or wmap.height != img.height - patch + 1:
        raise PatchLargerThanImage(
            "weight map was not built for this image and patch size")
    if wmap.total() <= 0.0:
        raise EmptyWeightMap("weight map carries no probability mass")
    rng = np.random.default_rng(seed)
    idx = draw_positions(wmap, n, rng)
    out = []
    for i in idx:
        x, y = int(i % wmap.width), int(i // wmap.width)
        out.append(((x, y), crop(img, x, y, patch, patch)))
    return out


class PairStream:
    """Deterministic, unbounded iterator of TrainingPairs."""

    def __init__(self, sources, patch: int, cfg: DegradationConfig,
                 masks=None, seed: int = 0):
        cfg.validate()
        if not sources:
            raise PatchLargerThanImage("pair stream needs at least one source")
        if patch % cfg.scale:
            raise PatchLargerThanImage(
                f"patch {patch} must be divisible by scale {cfg.scale}")
        self.patch = patch
        self.cfg = cfg
        self._rng = np.random.default_rng(seed)
        self.sources: list[tuple[str, ImageBuffer]] = []
        for i, src in enumerate(sources):
            if isinstance(src, (str, Path)):
                self.sources.append((str(src), decode_png(src)))
            elif isinstance(src, tuple):
                self.sources.append((str(src[0]), src[1]))
            else:
                self.sources.append((f"source-{i}", src))
        masks = list(masks) if masks else [None] * len(self.sources)
        if len(masks) != len(self.sources):
            raise PatchLargerThanImage("one mask per source (or None) required")
        # weight maps computed once per source, cached for the stream's life
        self.weight_maps = [build_weight_map(img, patch, mask)
                            for (_, img), mask in zip(self.sources, masks)]

    def __iter__(self):
        return self

    def __next__(self) -> TrainingPair:
        si = int(self._rng.integers(len(self.sources)))
        u = self._rng.random()
        degrade_seed = int(self._rng.integers(0, 2**63))

        wmap = self.weight_maps[si]
        cum = wmap.cumulative
        pos = min(int(np.searchsorted(cum, u, side="right")), cum.size - 1)
        x, y = pos % wmap.width, pos // wmap.width

        source_id, img = self.sources[si]
        hr = crop(img, x, y, self.patch, self.patch)
        params = sample_params(self.cfg, np.random.default_rng(degrade_seed))
        lr = degrade_with_params(hr, self.cfg, params)
        return TrainingPair(hr, lr, Provenance(source_id, x, y, degrade_seed, params))


def pair_stream(sources, patch: int, cfg: DegradationConfig,
                masks=None, seed: int = 0) -> PairStream:
    return PairStream(sources, patch, cfg, masks=masks, seed=seed)


def regenerate_pair(source: ImageBuffer, prov: Provenance, cfg: DegradationConfig,
                    patch: int) -> TrainingPair:
    """Rebuild a pair bit-exactly from its provenance record."""
    hr = crop(source, prov.x, prov.y, patch, patch)
    lr = degrade_with_params(hr, cfg, prov.params)
    return TrainingPair(hr, lr, prov)
