"""Command-line entry point.

One JSON config drives every subcommand: the tiler job fields live at the
top level and subcommand sections (`degrade_pairs`, `augment`, `composite`,
`dataset`) sit alongside them. Reports are machine-readable JSON on stdout;
exit codes are 0 (ok), 1 (operational error), 2 (config error).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as dataset_mod
from .errors import AtelierError, ParseError, ValidationError
from .imaging import ResampleFilter, decode_png, encode_png, read_png_header
from .pairsynth import DegradationConfig, pair_stream
from .refiner_api import build_refiner
from .stencil import (AugmentSpec, Placement, alpha_safe_transform,
                      composite_assets, parse_z_role, save_asset, validate_asset)
from .tiler import (Pass, PassSchedule, RefinePath, blend_weights,
                    compile_stages, minimum_budget, plan_tiles, run_schedule,
                    stream_process, validate_schedule)

ENV_ENDPOINT = "ATELIER_REFINER_ENDPOINT"
EXIT_OK, EXIT_OPERATIONAL, EXIT_CONFIG = 0, 1, 2

DEFAULT_PASS_GEOMETRY = {"tile": 1024, "overlap": 96, "pad": 16}
DEFAULT_DIFFUSION_DENOISE = {"A": 0.31, "B": 0.20, "C": 0.15}


@dataclass
class JobConfig:
    raw: dict
    schedule: PassSchedule | None
    seed: int
    parallelism: int
    warnings: list = field(default_factory=list)

    def section(self, name: str) -> dict:
        value = self.raw.get(name)
        if value is None:
            raise ValidationError([f"config has no '{name}' section"])
        return value


def _require(cond: bool, message: str, violations: list) -> None:
    if not cond:
        violations.append(message)


def _build_schedule(raw: dict, violations: list, seed: int) -> PassSchedule | None:
    path_name = raw.get("path", "diffusion")
    if path_name not in ("gan", "diffusion"):
        violations.append(f"path must be 'gan' or 'diffusion', got '{path_name}'")
        return None
    path = RefinePath(path_name)

    passes_cfg = raw.get("passes")
    if passes_cfg is None:
        if path == RefinePath.GAN:
            passes_cfg = [{"name": "gan", "denoise": 0.0, "tile": 512,
                           "overlap": 64, "pad": 16}]
        else:
            passes_cfg = [dict(name=n, denoise=d, **DEFAULT_PASS_GEOMETRY)
                          for n, d in DEFAULT_DIFFUSION_DENOISE.items()]
    passes = []
    for i, p in enumerate(passes_cfg):
        if "denoise" not in p:
            violations.append(f"pass #{i} has no denoise value")
            continue
        passes.append(Pass(
            name=str(p.get("name", f"pass{i}")),
            denoise=float(p["denoise"]),
            adapter_scale=float(p.get("adapter_scale", 1.0)),
            tile=int(p.get("tile", DEFAULT_PASS_GEOMETRY["tile"])),
            overlap=int(p.get("overlap", DEFAULT_PASS_GEOMETRY["overlap"])),
            pad=int(p.get("pad", DEFAULT_PASS_GEOMETRY["pad"])),
            prompt=str(p.get("prompt", "")),
            seed=int(p.get("seed", seed))))
    step_scales = tuple(float(s) for s in raw.get("step_scales", (2.0, 2.0)))
    return PassSchedule(path, tuple(passes), step_scales,
                        bool(raw.get("final_full_frame", False)))


def load_config(path) -> JobConfig:
    """Parse and validate a job config; every violation is reported at once."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a JSON object")

    violations: list[str] = []
    seed = int(raw.get("seed", 0))
    parallelism = int(raw.get("parallelism", 0)) or (os.cpu_count() or 1)
    _require(parallelism >= 1, "parallelism must be >= 1", violations)

    schedule = _build_schedule(raw, violations, seed)
    warnings: list[str] = []
    if schedule is not None:
        try:
            warnings = validate_schedule(schedule)
        except ValidationError as exc:
            violations.extend(exc.violations)

    target_scale = raw.get("target_scale", None)
    if target_scale is not None:
        _require(float(target_scale) >= 1.0, "target_scale must be >= 1", violations)

    deg = raw.get("degrade_pairs", {}).get("degradation", {})
    for key in ("blur_sigma", "noise_sigma", "jpeg_quality"):
        rng_pair = deg.get(key)
        if rng_pair is not None and rng_pair[0] > rng_pair[1]:
            violations.append(f"degradation range '{key}' is not ordered")

    if violations:
        raise ValidationError(violations)
    return JobConfig(raw, schedule, seed, parallelism, warnings)


# --- subcommands ---------------------------------------------------------------

def _resolve_endpoint(cfg: JobConfig, args) -> str | None:
    """Precedence: --refiner-endpoint flag > config > environment."""
    if getattr(args, "refiner_endpoint", None):
        return args.refiner_endpoint
    endpoint = cfg.raw.get("refiner", {}).get("endpoint")
    return endpoint or os.environ.get(ENV_ENDPOINT)


def _build_job_refiner(cfg: JobConfig, args):
    ref_cfg = cfg.raw.get("refiner", {"kind": "identity"})
    return build_refiner(ref_cfg.get("kind", "identity"),
                         endpoint=_resolve_endpoint(cfg, args),
                         scale_factor=int(ref_cfg.get("scale_factor", 4)))


def cmd_plan(cfg: JobConfig, args) -> dict:
    """Dry-run: tile statistics and memory estimates from the PNG header only."""
    header = read_png_header(cfg.raw["input"])
    schedule = cfg.schedule
    first = schedule.passes[0]
    plan = plan_tiles(header.width, header.height, first.tile, first.overlap,
                      first.pad)
    refiner = _build_job_refiner(cfg, args)
    stages, target_dims, fallback = compile_stages(
        header.width, header.height, schedule, refiner.capabilities(),
        float(cfg.raw.get("target_scale", 1.0)))
    depth_bytes = header.depth.dtype.itemsize
    min_budget = minimum_budget(stages, header.channels, depth_bytes,
                                cfg.parallelism)
    full_canvas_bytes = (target_dims[0] * target_dims[1]
                         * header.channels * 4)
    return {
        "input": str(cfg.raw["input"]),
        "canvas": [header.width, header.height],
        "target": list(target_dims),
        "first_pass_tiles": len(plan.tiles),
        "tile_grid": [plan.n_cols, plan.n_rows],
        "stages": len(stages),
        "tiles_total": sum(
            len(plan_tiles(s.in_w, s.in_h, s.pass_.tile, s.pass_.overlap,
                           s.pass_.pad).tiles)
            for s in stages if hasattr(s, "pass_")),
        "minimum_streaming_budget_bytes": min_budget,
        "in_memory_estimate_bytes": full_canvas_bytes,
        "final_full_frame_fallback": fallback,
    }


def cmd_upscale(cfg: JobConfig, args) -> dict:
    input_path = cfg.raw["input"]
    output_path = cfg.raw["output"]
    target_scale = float(cfg.raw.get("target_scale", 1.0))
    refiner = _build_job_refiner(cfg, args)
    budget = cfg.raw.get("memory_budget")
    if budget:
        report = stream_process(input_path, output_path, cfg.schedule, refiner,
                                int(budget), target_scale=target_scale,
                                parallelism=cfg.parallelism)
    else:
        img = decode_png(input_path)
        out, report = run_schedule(img, cfg.schedule, refiner, target_scale,
                                   parallelism=cfg.parallelism)
        encode_png(out, output_path)
    result = report.to_dict()
    result["output"] = str(output_path)
    result["streamed"] = bool(budget)
    return result


def cmd_degrade_pairs(cfg: JobConfig, args) -> dict:
    sec = cfg.section("degrade_pairs")
    deg = sec.get("degradation", {})
    filters = tuple(ResampleFilter(f) for f in
                    deg.get("filters", ["nearest", "bilinear", "bicubic"]))
    dconf = DegradationConfig(
        blur_sigma_range=tuple(deg.get("blur_sigma", (0.2, 3.0))),
        noise_sigma_range=tuple(deg.get("noise_sigma", (0.0, 10.0))),
        scale=int(deg.get("scale", 4)),
        downsample_filters=filters,
        jpeg_quality_range=tuple(deg.get("jpeg_quality", (30, 95))))
    out_dir = Path(sec["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = sec.get("stem", "pair")
    patch = int(sec.get("patch", 256))
    count = int(sec.get("count", 16))

    masks = None
    if sec.get("masks"):
        masks = [decode_png(m) if m else None for m in sec["masks"]]
    stream = pair_stream(sec["sources"], patch, dconf, masks=masks,
                         seed=cfg.seed)
    written = []
    for idx in range(count):
        pair = next(stream)
        hr_path = out_dir / f"{stem}_{idx}_hr.png"
        lr_path = out_dir / f"{stem}_{idx}_lr.png"
        encode_png(pair.hr, hr_path)
        encode_png(pair.lr, lr_path)
        sidecar = out_dir / f"{stem}_{idx}.json"
        sidecar.write_text(json.dumps(pair.provenance.to_dict(), indent=2))
        written.append(hr_path.name)
    return {"pairs": count, "patch": patch, "scale": dconf.scale,
            "out_dir": str(out_dir), "first": written[:3]}


def cmd_augment(cfg: JobConfig, args) -> dict:
    sec = cfg.section("augment")
    root, out_dir = Path(sec["root"]), Path(sec["out_dir"])
    variants = int(sec.get("variants", 1))
    rot_max = float(sec.get("rotation_max_deg", 15.0))
    scale_lo, scale_hi = sec.get("scale_range", (0.85, 1.15))
    jitter_max = float(sec.get("jitter_max", 0.10))
    grain = float(sec.get("grain_sigma", 3.0))
    allow_flip = bool(sec.get("flip", True))

    paths = sorted(root.rglob("*.png"), key=lambda p: p.as_posix())
    produced = 0
    for i, path in enumerate(paths):
        asset = validate_asset(path)
        for k in range(variants):
            gen = np.random.default_rng(cfg.seed + i * 1000 + k)
            spec = AugmentSpec(
                hflip=allow_flip and bool(gen.integers(2)),
                vflip=False,
                rotation_deg=float(gen.uniform(-rot_max, rot_max)),
                scale_factor=float(gen.uniform(scale_lo, scale_hi)),
                brightness=float(gen.uniform(-jitter_max, jitter_max)),
                contrast=float(gen.uniform(-jitter_max, jitter_max)),
                grain_sigma=grain,
                seed=int(gen.integers(2**63)))
            out = alpha_safe_transform(asset, spec)
            rel = path.relative_to(root)
            dest = out_dir / rel.parent / f"{path.stem}_aug{k}.png"
            dest.parent.mkdir(parents=True, exist_ok=True)
            save_asset(out, dest)
            if asset.caption is not None:
                dest.with_suffix(".txt").write_text(asset.caption + "\n")
            produced += 1
    return {"assets": len(paths), "variants": variants, "written": produced,
            "out_dir": str(out_dir)}


def cmd_composite(cfg: JobConfig, args) -> dict:
    sec = cfg.section("composite")
    canvas_w, canvas_h = sec["canvas"]
    items = []
    for entry in sec["assets"]:
        role = parse_z_role(entry["z_role"]) if "z_role" in entry else None
        asset = validate_asset(entry["path"], z_role=role)
        items.append((asset, Placement(int(entry.get("x", 0)),
                                       int(entry.get("y", 0)),
                                       float(entry.get("scale", 1.0)))))
    canvas = composite_assets(items, int(canvas_w), int(canvas_h))
    encode_png(canvas, sec["output"])
    return {"output": sec["output"], "layers": len(items),
            "canvas": [canvas_w, canvas_h]}


def cmd_dataset(cfg: JobConfig, args) -> dict:
    sec = cfg.section("dataset")
    root = sec["root"]
    report = dataset_mod.scan(root)
    action = args.dataset_action
    if action == "audit":
        target = tuple(sec.get("target_ratio", dataset_mod.DEFAULT_TARGET_RATIO))
        out = dataset_mod.audit_ratio(report.records, target)
    elif action == "expand":
        expanded = dataset_mod.hflip_expand(report.records, sec["out_dir"])
        out = {"records_in": len(report.records), "records_out": len(expanded),
               "out_dir": sec["out_dir"]}
    elif action == "curriculum":
        out = dataset_mod.curriculum_manifest(report.records)
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError([f"unknown dataset action '{action}'"])
    out["scan_issues"] = report.to_dict()["issues"]
    return out


# --- entry ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atelier",
        description="Tiled multi-pass refinement, pair synthesis, and dataset tooling")
    parser.add_argument("--config", required=True, help="path to the JSON job config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's global seed")
    parser.add_argument("--parallelism", type=int, default=None,
                        help="worker pool size (default: config, then cores)")
    parser.add_argument("--refiner-endpoint", default=None,
                        help="override the refiner endpoint")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate config and report without executing")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in ("plan", "upscale", "degrade-pairs", "augment", "composite"):
        sub.add_parser(name)
    ds = sub.add_parser("dataset")
    ds.add_argument("dataset_action", choices=["audit", "expand", "curriculum"])
    return parser


_DISPATCH = {
    "plan": cmd_plan,
    "upscale": cmd_upscale,
    "degrade-pairs": cmd_degrade_pairs,
    "augment": cmd_augment,
    "composite": cmd_composite,
    "dataset": cmd_dataset,
}


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ParseError, ValidationError) as exc:
        _emit({"status": "error",
               "error": {"type": type(exc).__name__, "message": str(exc),
                         "violations": getattr(exc, "violations", [])}})
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = load_config_with_seed(cfg, args.seed)
    if args.parallelism is not None:
        cfg.parallelism = max(1, args.parallelism)

    if args.dry_run and args.subcommand != "plan":
        _emit({"status": "ok", "subcommand": args.subcommand, "dry_run": True,
               "warnings": cfg.warnings})
        return EXIT_OK

    try:
        report = _DISPATCH[args.subcommand](cfg, args)
    except (ParseError, ValidationError) as exc:
        _emit({"status": "error",
               "error": {"type": type(exc).__name__, "message": str(exc),
                         "violations": getattr(exc, "violations", [])}})
        return EXIT_CONFIG
    except (AtelierError, OSError) as exc:
        _emit({"status": "error",
               "error": {"type": type(exc).__name__, "message": str(exc)}})
        return EXIT_OPERATIONAL
    _emit({"status": "ok", "subcommand": args.subcommand,
           "warnings": cfg.warnings, "report": report})
    return EXIT_OK


def load_config_with_seed(cfg: JobConfig, seed: int) -> JobConfig:
    """Rebuild the config with an overridden global seed."""
    raw = dict(cfg.raw)
    raw["seed"] = seed
    passes = raw.get("passes")
    if passes:
        raw["passes"] = [{**p, "seed": p.get("seed", seed)} for p in passes]
    schedule = _build_schedule(raw, [], seed)
    return JobConfig(raw, schedule, seed, cfg.parallelism, cfg.warnings)


if __name__ == "__main__":
    sys.exit(main())
