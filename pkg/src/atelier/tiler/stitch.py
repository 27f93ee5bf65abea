"""Weighted reassembly of refined tiles into a canvas.

Accumulation happens in float32 in row-major tile order regardless of the
order tiles arrive in, so the result is independent of completion order
(and bit-identical to the streaming engine's banded accumulation).
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, MissingTile
from ..imaging import ImageBuffer
from ..imaging.buffer import quantize
from .blend import BlendField, blend_weights
from .plan import TilePlan, TileSpec


def infer_scale(buf: ImageBuffer, padded_w: int, padded_h: int) -> int:
    if buf.width % padded_w or buf.height % padded_h:
        raise DimensionMismatch(
            f"refined tile {buf.width}x{buf.height} is not an integer multiple "
            f"of its padded rect {padded_w}x{padded_h}")
    sw, sh = buf.width // padded_w, buf.height // padded_h
    if sw != sh or sw < 1:
        raise DimensionMismatch(
            f"refined tile implies anisotropic scale {sw}x{sh}")
    return sw


def stitch(refined_tiles, plan: TilePlan, field: BlendField | None = None) -> ImageBuffer:
    """Blend (TileSpec, refined buffer) pairs back into one image.

    Refined buffers include their padding; the scale factor is inferred
    from their dimensions. Output depth/layout follow the tile buffers.
    """
    by_index = {}
    for spec, buf in refined_tiles:
        by_index[(spec.col, spec.row)] = buf
    for spec in plan.tiles:
        if (spec.col, spec.row) not in by_index:
            raise MissingTile(f"no refined buffer for tile (col={spec.col}, row={spec.row})")

    first = by_index[(plan.tiles[0].col, plan.tiles[0].row)]
    scale = infer_scale(first, plan.tiles[0].padded.w, plan.tiles[0].padded.h)
    splan = plan.scaled(scale)
    sfield = blend_weights(splan) if (scale != 1 or field is None) else field

    acc = np.zeros((splan.canvas_h, splan.canvas_w, first.channels), dtype=np.float32)
    for spec, sspec in zip(plan.tiles, splan.tiles):
        buf = by_index[(spec.col, spec.row)]
        if buf.layout != first.layout or buf.depth != first.depth:
            raise DimensionMismatch("refined tiles disagree on layout or depth")
        if (buf.width, buf.height) != (sspec.padded.w, sspec.padded.h):
            raise DimensionMismatch(
                f"tile (col={spec.col}, row={spec.row}) is {buf.width}x{buf.height}, "
                f"expected {sspec.padded.w}x{sspec.padded.h}")
        accumulate_tile(acc, buf, sspec, sfield, y_offset=0)

    return ImageBuffer(quantize(acc, first.depth), first.layout, first.depth,
                       first.alpha_mode)


def accumulate_tile(acc: np.ndarray, buf: ImageBuffer, sspec: TileSpec,
                    sfield: BlendField, y_offset: int) -> None:
    """Add one weighted tile core into an accumulator.

    `acc` holds output rows starting at `y_offset`; the streaming engine
    calls this with band-local accumulators, stitch() with the full canvas.
    The float op sequence per pixel is identical either way.
    """
    core, padded = sspec.core, sspec.padded
    core_f32 = buf.to_f32()[core.y - padded.y: core.y1 - padded.y,
                            core.x - padded.x: core.x1 - padded.x, :]
    weights = sfield.weights_for(sspec)
    acc[core.y - y_offset: core.y1 - y_offset, core.x: core.x1, :] += \
        core_f32 * weights[:, :, None]
