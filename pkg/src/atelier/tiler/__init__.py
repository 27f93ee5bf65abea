"""Tiled multi-pass refinement: planning, blending, scheduling, streaming."""

from .blend import BlendField, blend_weights
from .plan import Rect, TilePlan, TileSpec, axis_positions, plan_tiles
from .schedule import (Pass, PassReport, PassSchedule, RefinePath, RunReport,
                       compile_stages, default_diffusion_schedule,
                       default_gan_schedule, run_pass, run_schedule,
                       validate_schedule)
from .stitch import stitch
from .stream import MemoryMeter, minimum_budget, stream_process

__all__ = [
    "Rect", "TileSpec", "TilePlan", "plan_tiles", "axis_positions",
    "BlendField", "blend_weights", "stitch",
    "Pass", "PassSchedule", "RefinePath", "validate_schedule",
    "default_diffusion_schedule", "default_gan_schedule",
    "compile_stages", "run_pass", "run_schedule",
    "PassReport", "RunReport",
    "MemoryMeter", "minimum_budget", "stream_process",
]
