"""Partition-of-unity blend weights for overlapping tiles.

Each tile's weight field is separable: a per-column profile times a
per-row profile. Profiles ramp with a raised cosine across the actual
inter-tile overlap and sit at 1 elsewhere; axis-wise normalization against
the summed profiles then pins every per-pixel sum to 1 within float32
rounding, including corners where four windows meet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plan import TilePlan, TileSpec


def _ramp_up(length: int) -> np.ndarray:
    t = (np.arange(length, dtype=np.float64) + 1.0) / (length + 1.0)
    return (0.5 - 0.5 * np.cos(np.pi * t)).astype(np.float32)


def _axis_profiles(positions, sizes, dim: int) -> list[np.ndarray]:
    n = len(positions)
    profiles = []
    for i in range(n):
        prof = np.ones(sizes[i], dtype=np.float32)
        if i > 0:
            left_overlap = positions[i - 1] + sizes[i - 1] - positions[i]
            left_overlap = max(0, min(left_overlap, sizes[i]))
            if left_overlap:
                prof[:left_overlap] *= _ramp_up(left_overlap)
        if i < n - 1:
            right_overlap = positions[i] + sizes[i] - positions[i + 1]
            right_overlap = max(0, min(right_overlap, sizes[i]))
            if right_overlap:
                prof[sizes[i] - right_overlap:] *= _ramp_up(right_overlap)[::-1]
        profiles.append(prof)
    total = np.zeros(dim, dtype=np.float32)
    for p, prof in zip(positions, profiles):
        total[p:p + len(prof)] += prof
    return [prof / total[p:p + len(prof)]
            for p, prof in zip(positions, profiles)]


@dataclass
class BlendField:
    """Normalized per-tile blend weights over each tile's core rect."""

    plan: TilePlan
    col_profiles: list[np.ndarray]
    row_profiles: list[np.ndarray]

    def weights_for(self, tile: TileSpec) -> np.ndarray:
        """The (core_h, core_w) float32 weight map for one tile."""
        return np.multiply.outer(self.row_profiles[tile.row],
                                 self.col_profiles[tile.col])


def blend_weights(plan: TilePlan) -> BlendField:
    core_ws = [min(plan.tile, plan.canvas_w)] * plan.n_cols
    core_hs = [min(plan.tile, plan.canvas_h)] * plan.n_rows
    cols = _axis_profiles(plan.xs, core_ws, plan.canvas_w)
    rows = _axis_profiles(plan.ys, core_hs, plan.canvas_h)
    return BlendField(plan, cols, rows)
