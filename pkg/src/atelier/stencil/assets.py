"""Stencil asset loading and the on-disk taxonomy.

Assets live in a folder tree `<root>/<z_role>/<category>/<line_weight>/`
with optional `<name>.txt` caption sidecars. Assets are always RGBA with
straight alpha; the alpha channel is never dropped on save.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from ..errors import (AtelierError, MissingAlphaChannel, UnknownZRole,
                      UnreadableFile)
from ..imaging import AlphaMode, ImageBuffer, Layout, decode_png, encode_png


class ZRole(Enum):
    FG = "fg"
    MG = "mg"
    BG_OVERLAY = "bg-overlay"


class LineWeight(Enum):
    THIN = "thin"
    MEDIUM = "medium"
    THICK = "thick"


_Z_ROLE_NAMES = {"fg": ZRole.FG, "mg": ZRole.MG,
                 "bg-overlay": ZRole.BG_OVERLAY, "bg_overlay": ZRole.BG_OVERLAY,
                 "bgoverlay": ZRole.BG_OVERLAY}


@dataclass
class StencilAsset:
    image: ImageBuffer            # RGBA, straight alpha
    z_role: ZRole
    line_weight: LineWeight
    category: str
    caption: str | None = None
    caption_path: Path | None = None
    source_path: Path | None = None

    def __post_init__(self):
        if self.image.layout != Layout.RGBA:
            raise MissingAlphaChannel("stencil assets must be RGBA")
        if self.image.alpha_mode != AlphaMode.STRAIGHT:
            raise MissingAlphaChannel("stencil assets carry straight alpha")

    def with_image(self, image: ImageBuffer) -> "StencilAsset":
        return replace(self, image=image)


def parse_z_role(name: str) -> ZRole:
    role = _Z_ROLE_NAMES.get(name.strip().casefold())
    if role is None:
        raise UnknownZRole(f"'{name}' is not one of fg/mg/bg-overlay")
    return role


def parse_line_weight(name: str) -> LineWeight:
    try:
        return LineWeight(name.strip().casefold())
    except ValueError:
        return LineWeight.MEDIUM  # taxonomy may omit the weight level


def validate_asset(path, z_role: ZRole | None = None,
                   line_weight: LineWeight | None = None) -> StencilAsset:
    """Decode a PNG asset and derive its tags from the folder taxonomy.

    Expects `.../<z_role>/<category>/<line_weight>/<name>.png`; explicit
    arguments override the folder-derived values.
    """
    path = Path(path)
    try:
        image = decode_png(path)
    except AtelierError:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        raise UnreadableFile(f"cannot decode {path}: {exc}") from exc
    if image.layout != Layout.RGBA:
        raise MissingAlphaChannel(f"{path} has no alpha channel")

    parents = path.parent.parts
    if line_weight is None:
        line_weight = parse_line_weight(parents[-1] if parents else "")
    category = parents[-2] if len(parents) >= 2 else ""
    if z_role is None:
        if len(parents) < 3:
            raise UnknownZRole(f"{path} is not inside a z-role taxonomy")
        z_role = parse_z_role(parents[-3])

    caption_path = path.with_suffix(".txt")
    caption = None
    if caption_path.exists():
        caption = caption_path.read_text(encoding="utf-8").strip()
    else:
        caption_path = None
    return StencilAsset(image, z_role, line_weight, category,
                        caption=caption, caption_path=caption_path,
                        source_path=path)


def save_asset(asset: StencilAsset, path) -> None:
    """Write the asset as an RGBA PNG (alpha always preserved)."""
    encode_png(asset.image, path)
