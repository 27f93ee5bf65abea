"""Training-pair synthesis: weighted patch sampling + degradation pipeline."""

from .augment import PairAugmentOps, augment_pair
from .degrade import (DegradationConfig, DegradationParams, degrade,
                      degrade_with_params, jpeg_roundtrip, neutral_config,
                      sample_params)
from .stream import (PairStream, Provenance, TrainingPair, pair_stream,
                     regenerate_pair, sample_patches)
from .weights import WeightMap, build_weight_map, draw_positions

__all__ = [
    "WeightMap", "build_weight_map", "draw_positions",
    "DegradationConfig", "DegradationParams", "degrade", "degrade_with_params",
    "neutral_config", "sample_params", "jpeg_roundtrip",
    "TrainingPair", "Provenance", "PairStream", "pair_stream",
    "sample_patches", "regenerate_pair",
    "PairAugmentOps", "augment_pair",
]
