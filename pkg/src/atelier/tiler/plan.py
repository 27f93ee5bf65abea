"""Deterministic decomposition of a canvas into padded overlapping tiles."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InvalidGeometry


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    def scaled(self, s: int) -> "Rect":
        return Rect(self.x * s, self.y * s, self.w * s, self.h * s)


@dataclass(frozen=True)
class TileSpec:
    col: int
    row: int
    core: Rect        # the region this tile owns in the blend
    padded: Rect      # core + context sent to the refiner, clamped to canvas


@dataclass(frozen=True)
class TilePlan:
    canvas_w: int
    canvas_h: int
    tile: int
    overlap: int
    pad: int
    xs: tuple[int, ...]            # core x positions, ascending
    ys: tuple[int, ...]
    tiles: tuple[TileSpec, ...]    # row-major

    @property
    def n_cols(self) -> int:
        return len(self.xs)

    @property
    def n_rows(self) -> int:
        return len(self.ys)

    def linear_index(self, col: int, row: int) -> int:
        return row * self.n_cols + col

    def scaled(self, s: int) -> "TilePlan":
        """The plan at an integer upscale; identical to planning the scaled canvas."""
        if s == 1:
            return self
        tiles = tuple(TileSpec(t.col, t.row, t.core.scaled(s), t.padded.scaled(s))
                      for t in self.tiles)
        return TilePlan(self.canvas_w * s, self.canvas_h * s, self.tile * s,
                        self.overlap * s, self.pad * s,
                        tuple(x * s for x in self.xs),
                        tuple(y * s for y in self.ys), tiles)


def axis_positions(dim: int, tile: int, overlap: int) -> tuple[int, ...]:
    """Core positions along one axis: stride steps, final position clamped."""
    if dim <= tile:
        return (0,)
    stride = tile - overlap
    positions = []
    p = 0
    while p + tile < dim:
        positions.append(p)
        p += stride
    last = dim - tile
    if not positions or positions[-1] != last:
        positions.append(last)
    return tuple(positions)


def plan_tiles(w: int, h: int, tile: int, overlap: int, pad: int) -> TilePlan:
    """Pure function of (w, h, tile, overlap, pad) covering the whole canvas."""
    if w <= 0 or h <= 0:
        raise InvalidGeometry(f"canvas dimensions must be positive, got {w}x{h}")
    if tile <= 0:
        raise InvalidGeometry(f"tile size must be positive, got {tile}")
    if not 0 <= overlap < tile:
        raise InvalidGeometry(f"overlap must satisfy 0 <= overlap < tile, "
                              f"got overlap={overlap}, tile={tile}")
    if pad < 0:
        raise InvalidGeometry(f"pad must be >= 0, got {pad}")

    xs = axis_positions(w, tile, overlap)
    ys = axis_positions(h, tile, overlap)
    core_w, core_h = min(tile, w), min(tile, h)

    tiles = []
    for row, y in enumerate(ys):
        for col, x in enumerate(xs):
            core = Rect(x, y, core_w, core_h)
            px0, py0 = max(0, x - pad), max(0, y - pad)
            px1, py1 = min(w, x + core_w + pad), min(h, y + core_h + pad)
            tiles.append(TileSpec(col, row, core, Rect(px0, py0, px1 - px0, py1 - py0)))
    return TilePlan(w, h, tile, overlap, pad, xs, ys, tuple(tiles))
