"""Multi-pass refinement schedules and the in-memory execution engine.

A schedule compiles to a linear list of stages (classical resamples and
tiled refinement passes). The same compiler drives both the in-memory
engine here and the row-band streaming engine, so the two paths execute
identical geometry and produce bit-identical pixels.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from enum import Enum

from ..errors import (AtelierError, CapabilityExceeded, RefinerError,
                      TargetUnreachable, ValidationError)
from ..imaging import ImageBuffer, ResampleFilter, crop, resample
from ..refiner_api import RefineRequest, RefinerCapabilities, RefinerHandle
from .blend import blend_weights
from .plan import plan_tiles
from .stitch import stitch


class RefinePath(Enum):
    GAN = "gan"
    DIFFUSION = "diffusion"


@dataclass(frozen=True)
class Pass:
    name: str
    denoise: float
    adapter_scale: float = 1.0
    tile: int = 1024
    overlap: int = 96
    pad: int = 16
    prompt: str = ""
    seed: int = 0


@dataclass(frozen=True)
class PassSchedule:
    path: RefinePath
    passes: tuple[Pass, ...]
    step_scales: tuple[float, ...]
    final_full_frame: bool = False


# paper-practice envelopes; outside them the config warns but still runs
TILE_ENVELOPE = (512, 1536)
OVERLAP_ENVELOPE = (64, 128)
DENOISE_ENVELOPES = {"a": (0.25, 0.37), "b": (0.17, 0.23), "c": (0.13, 0.17)}
DENOISE_ENVELOPE_ANY = (0.13, 0.37)

FINAL_PASS_DENOISE = 0.10
FINAL_PASS_OVERLAP = 128


def default_diffusion_schedule(tile: int = 1024, overlap: int = 96, pad: int = 16,
                               prompt: str = "", seed: int = 0,
                               step_scales: tuple[float, ...] = (2.0, 2.0),
                               final_full_frame: bool = False) -> PassSchedule:
    """Three descending-denoise passes at the midpoint defaults."""
    mk = lambda n, d: Pass(n, d, 1.0, tile, overlap, pad, prompt, seed)
    return PassSchedule(RefinePath.DIFFUSION,
                        (mk("A", 0.31), mk("B", 0.20), mk("C", 0.15)),
                        tuple(step_scales), final_full_frame)


def default_gan_schedule(tile: int = 512, overlap: int = 64, pad: int = 16,
                         seed: int = 0, steps: int = 1) -> PassSchedule:
    gan_pass = Pass("gan", 0.0, 1.0, tile, overlap, pad, "", seed)
    return PassSchedule(RefinePath.GAN, (gan_pass,), (4.0,) * steps)


def _envelope_for(name: str) -> tuple[float, float]:
    key = name.strip().lower().removeprefix("pass").strip(" -_")
    return DENOISE_ENVELOPES.get(key, DENOISE_ENVELOPE_ANY)


def validate_schedule(schedule: PassSchedule) -> list[str]:
    """Hard violations raise ValidationError; returns soft envelope warnings."""
    violations, warnings = [], []
    if not schedule.passes:
        violations.append("schedule has no passes")
    if schedule.path == RefinePath.GAN:
        if len(schedule.passes) != 1:
            violations.append("GAN path takes exactly one pass")
        if schedule.final_full_frame:
            violations.append("final_full_frame requires the diffusion path "
                              "(a scale-1 refiner)")
    for p in schedule.passes:
        if not 0.0 <= p.denoise <= 1.0:
            violations.append(f"pass '{p.name}': denoise {p.denoise} outside [0, 1]")
        if p.tile <= 0 or not 0 <= p.overlap < p.tile:
            violations.append(f"pass '{p.name}': overlap {p.overlap} must satisfy "
                              f"0 <= overlap < tile ({p.tile})")
        if p.pad < 0:
            violations.append(f"pass '{p.name}': pad must be >= 0")
        if p.adapter_scale < 0:
            violations.append(f"pass '{p.name}': adapter_scale must be >= 0")
    if not schedule.step_scales:
        violations.append("schedule needs at least one step scale")
    for s in schedule.step_scales:
        # 1.0 = refine at the current resolution (no classical pre-resize)
        if s != 1.0 and not 2.0 <= s <= 4.0:
            violations.append(f"step scale {s} must be 1 or within [2, 4]")
    if violations:
        raise ValidationError(violations)

    for p in schedule.passes:
        if not TILE_ENVELOPE[0] <= p.tile <= TILE_ENVELOPE[1]:
            warnings.append(f"pass '{p.name}': tile {p.tile} outside the "
                            f"recommended {TILE_ENVELOPE[0]}..{TILE_ENVELOPE[1]}")
        if not OVERLAP_ENVELOPE[0] <= p.overlap <= OVERLAP_ENVELOPE[1]:
            warnings.append(f"pass '{p.name}': overlap {p.overlap} outside the "
                            f"recommended {OVERLAP_ENVELOPE[0]}..{OVERLAP_ENVELOPE[1]}")
        if schedule.path == RefinePath.DIFFUSION:
            lo, hi = _envelope_for(p.name)
            if not lo <= p.denoise <= hi:
                warnings.append(f"pass '{p.name}': denoise {p.denoise} outside the "
                                f"recommended {lo}..{hi}")
    return warnings


# --- stage compilation -------------------------------------------------------

@dataclass(frozen=True)
class ResampleStage:
    in_w: int
    in_h: int
    out_w: int
    out_h: int
    filter: ResampleFilter = ResampleFilter.LANCZOS3


@dataclass(frozen=True)
class RefineStage:
    in_w: int
    in_h: int
    pass_: Pass
    scale_factor: int
    is_fallback_full_frame: bool = False

    @property
    def out_w(self) -> int:
        return self.in_w * self.scale_factor

    @property
    def out_h(self) -> int:
        return self.in_h * self.scale_factor


def ceil_exact(value: float) -> int:
    return int(math.ceil(value - 1e-9))


def compile_stages(input_w: int, input_h: int, schedule: PassSchedule,
                   caps: RefinerCapabilities, target_scale: float):
    """Expand a schedule into concrete stages for a given canvas and refiner.

    Returns (stages, (target_w, target_h), fallback_engaged).
    """
    if target_scale < 1.0:
        raise TargetUnreachable(f"target scale {target_scale} must be >= 1")
    product = math.prod(schedule.step_scales)
    if schedule.path == RefinePath.GAN:
        product = float(caps.scale_factor ** len(schedule.step_scales))
    if product + 1e-9 < target_scale:
        raise TargetUnreachable(
            f"step scales reach x{product:g}, target needs x{target_scale:g}")

    if schedule.path == RefinePath.DIFFUSION and caps.scale_factor != 1:
        raise CapabilityExceeded(
            f"diffusion path refines at scale 1, refiner is x{caps.scale_factor}")
    if schedule.path == RefinePath.GAN and caps.scale_factor < 2:
        raise CapabilityExceeded("GAN path needs an upscaling refiner")

    target_w = ceil_exact(input_w * target_scale)
    target_h = ceil_exact(input_h * target_scale)

    stages = []
    cur_w, cur_h = input_w, input_h
    for step_scale in schedule.step_scales:
        if schedule.path == RefinePath.DIFFUSION:
            sw, sh = ceil_exact(cur_w * step_scale), ceil_exact(cur_h * step_scale)
            if (sw, sh) != (cur_w, cur_h):
                stages.append(ResampleStage(cur_w, cur_h, sw, sh))
                cur_w, cur_h = sw, sh
            for p in schedule.passes:
                stages.append(RefineStage(cur_w, cur_h, p, 1))
        else:
            stages.append(RefineStage(cur_w, cur_h, schedule.passes[0],
                                      caps.scale_factor))
            cur_w *= caps.scale_factor
            cur_h *= caps.scale_factor

    if (cur_w, cur_h) != (target_w, target_h):
        stages.append(ResampleStage(cur_w, cur_h, target_w, target_h))
        cur_w, cur_h = target_w, target_h

    fallback = False
    if schedule.final_full_frame:
        seed = schedule.passes[-1].seed
        if max(cur_w, cur_h) <= caps.max_tile_px:
            final = Pass("final", FINAL_PASS_DENOISE, 1.0,
                         tile=max(cur_w, cur_h), overlap=0, pad=0, seed=seed)
        else:
            fallback = True
            final = Pass("final", FINAL_PASS_DENOISE, 1.0,
                         tile=caps.max_tile_px, overlap=FINAL_PASS_OVERLAP,
                         pad=0, seed=seed)
        stages.append(RefineStage(cur_w, cur_h, final, 1,
                                  is_fallback_full_frame=fallback))
    return stages, (target_w, target_h), fallback


# --- execution ---------------------------------------------------------------

@dataclass
class PassReport:
    name: str
    canvas: tuple[int, int]
    tiles: int
    seconds: float = 0.0
    tile_latencies: list = dataclass_field(default_factory=list)

    def to_dict(self) -> dict:
        return {"name": self.name, "canvas": list(self.canvas),
                "tiles": self.tiles, "seconds": self.seconds,
                "tile_latencies": self.tile_latencies}


@dataclass
class RunReport:
    input_dims: tuple[int, int]
    output_dims: tuple[int, int]
    passes: list = dataclass_field(default_factory=list)
    warnings: list = dataclass_field(default_factory=list)
    fallback_full_frame: bool = False
    peak_memory_bytes: int | None = None
    minimum_budget_bytes: int | None = None
    total_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {"input_dims": list(self.input_dims),
                "output_dims": list(self.output_dims),
                "passes": [p.to_dict() for p in self.passes],
                "warnings": list(self.warnings),
                "fallback_full_frame": self.fallback_full_frame,
                "peak_memory_bytes": self.peak_memory_bytes,
                "minimum_budget_bytes": self.minimum_budget_bytes,
                "total_seconds": self.total_seconds}


def run_pass(canvas: ImageBuffer, pass_: Pass, refiner: RefinerHandle,
             parallelism: int = 1, report: PassReport | None = None) -> ImageBuffer:
    """Plan, refine every padded tile, and stitch at the refiner's scale."""
    if not 0.0 <= pass_.denoise <= 1.0:
        raise ValidationError([f"pass '{pass_.name}': denoise {pass_.denoise} "
                               "outside [0, 1]"])
    caps = refiner.capabilities()
    if pass_.tile + 2 * pass_.pad > caps.max_tile_px:
        raise CapabilityExceeded(
            f"padded tile {pass_.tile + 2 * pass_.pad} exceeds refiner "
            f"max_tile_px {caps.max_tile_px}")

    plan = plan_tiles(canvas.width, canvas.height, pass_.tile, pass_.overlap,
                      pass_.pad)
    field = blend_weights(plan)

    def refine_one(index_spec):
        i, spec = index_spec
        req = RefineRequest(
            image=crop(canvas, spec.padded.x, spec.padded.y,
                       spec.padded.w, spec.padded.h),
            denoise=pass_.denoise, prompt=pass_.prompt,
            adapter_scale=pass_.adapter_scale,
            seed=pass_.seed ^ i, pass_id=pass_.name)
        t0 = time.perf_counter()
        try:
            out = refiner.refine(req)
        except AtelierError:
            raise
        except Exception as exc:
            raise RefinerError(str(exc), tile_index=(spec.col, spec.row)) from exc
        return out, time.perf_counter() - t0

    indexed = list(enumerate(plan.tiles))
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(refine_one, indexed))
    else:
        results = [refine_one(item) for item in indexed]

    if report is not None:
        report.tile_latencies = [round(lat, 6) for _, lat in results]
    refined = [(spec, out) for (_, spec), (out, _) in zip(indexed, results)]
    return stitch(refined, plan, field)


def run_schedule(input_img: ImageBuffer, schedule: PassSchedule,
                 refiner: RefinerHandle, target_scale: float,
                 parallelism: int = 1) -> tuple[ImageBuffer, RunReport]:
    """Execute every stage in memory. Returns the canvas and a run report."""
    warnings = validate_schedule(schedule)
    caps = refiner.capabilities()
    stages, target_dims, fallback = compile_stages(
        input_img.width, input_img.height, schedule, caps, target_scale)

    report = RunReport((input_img.width, input_img.height), target_dims,
                       warnings=warnings, fallback_full_frame=fallback)
    started = time.perf_counter()
    cur = input_img
    for stage in stages:
        t0 = time.perf_counter()
        if isinstance(stage, ResampleStage):
            cur = resample(cur, stage.out_w, stage.out_h, stage.filter)
            report.passes.append(PassReport(
                f"resample-{stage.out_w}x{stage.out_h}",
                (stage.out_w, stage.out_h), 0, time.perf_counter() - t0))
        else:
            pass_report = PassReport(stage.pass_.name, (stage.out_w, stage.out_h), 0)
            cur = run_pass(cur, stage.pass_, refiner, parallelism, pass_report)
            pass_report.tiles = len(pass_report.tile_latencies)
            pass_report.seconds = time.perf_counter() - t0
            report.passes.append(pass_report)
    report.total_seconds = time.perf_counter() - started
    assert (cur.width, cur.height) == target_dims
    return cur, report
