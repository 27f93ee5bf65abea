"""Alpha-safe RGBA asset pipeline: augmentation, taxonomy, compositing."""

from .assets import (LineWeight, StencilAsset, ZRole, parse_line_weight,
                     parse_z_role, save_asset, validate_asset)
from .compose import Placement, composite_assets
from .transform import (AugmentSpec, add_grain, alpha_safe_transform,
                        exact_rotate90, rotate_scale)

__all__ = [
    "StencilAsset", "ZRole", "LineWeight",
    "validate_asset", "save_asset", "parse_z_role", "parse_line_weight",
    "AugmentSpec", "alpha_safe_transform", "rotate_scale", "add_grain",
    "exact_rotate90",
    "Placement", "composite_assets",
]
