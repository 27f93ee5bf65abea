"""Z-role-ordered alpha-aware compositing of stencil assets."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import EmptyAssetList
from ..imaging import (AlphaMode, Depth, ImageBuffer, Layout, ResampleFilter,
                       composite_over, premultiply, resample, unpremultiply)
from .assets import StencilAsset, ZRole

# draw order: background overlays first, foreground last
_ROLE_ORDER = {ZRole.BG_OVERLAY: 0, ZRole.MG: 1, ZRole.FG: 2}


@dataclass(frozen=True)
class Placement:
    x: int = 0
    y: int = 0
    scale: float = 1.0


def composite_assets(assets: list[tuple[StencilAsset, Placement]],
                     canvas_w: int, canvas_h: int,
                     depth: Depth = Depth.U8) -> ImageBuffer:
    """Layer assets onto a transparent canvas in BG-overlay -> MG -> FG order.

    Within a role the list order is preserved (stable sort). Placements may
    extend past the canvas; they are clipped.
    """
    if not assets:
        raise EmptyAssetList("composite needs at least one asset")
    canvas = ImageBuffer.new(canvas_w, canvas_h, Layout.RGBA, depth,
                             AlphaMode.STRAIGHT, fill=0)
    ordered = sorted(assets, key=lambda item: _ROLE_ORDER[item[0].z_role])
    for asset, place in ordered:
        img = asset.image
        if place.scale != 1.0:
            tw = max(1, round(img.width * place.scale))
            th = max(1, round(img.height * place.scale))
            img = unpremultiply(resample(premultiply(img), tw, th,
                                         ResampleFilter.BILINEAR))
        canvas = composite_over(canvas, img, place.x, place.y)
    return canvas
