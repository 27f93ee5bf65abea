"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The streaming criterion
builds a 16384x16384 canvas and takes a few minutes; everything else is
fast. Tolerances are pinned here and nowhere else.
"""

import functools
import json
import math
import time
from collections import Counter

import numpy as np
import pytest
import scipy.stats

from atelier import errors
from atelier.cli import main as cli_main
from atelier.dataset import CaptionTransformConfig, caption_transform
from atelier.imaging import (AlphaMode, Depth, ImageBuffer, Layout,
                             ResampleFilter, crop, resample)
from atelier.imaging.png import PngRowReader, PngRowWriter
from atelier.pairsynth import (DegradationConfig, PairAugmentOps, augment_pair,
                               build_weight_map, degrade, neutral_config,
                               pair_stream, sample_patches)
from atelier.refiner_api import IdentityRefiner, RefineRequest
from atelier.stencil import (AugmentSpec, LineWeight, StencilAsset, ZRole,
                             alpha_safe_transform, exact_rotate90)
from atelier.tiler import (Pass, PassSchedule, RefinePath, blend_weights,
                           plan_tiles, run_schedule, stitch, stream_process,
                           validate_schedule)

from conftest import SeededNoiseRefiner, random_image


def criterion(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"\n[ACCEPTANCE] {name}: FAIL")
                raise
            print(f"\n[ACCEPTANCE] {name}: PASS")
            return result
        return wrapper
    return deco


@criterion("partition-of-unity (200 random plans, sums within 1e-6, <60s)")
def test_partition_of_unity():
    started = time.perf_counter()
    gen = np.random.default_rng(20250811)
    for _ in range(200):
        tile = int(gen.integers(512, 1537))
        overlap = int(gen.integers(64, 129))
        pad = int(gen.integers(0, 33))
        w = int(gen.integers(tile, 2 * tile + 200))
        h = int(gen.integers(tile, 2 * tile + 200))
        plan = plan_tiles(w, h, tile, overlap, pad)
        field = blend_weights(plan)
        acc = np.zeros((h, w), dtype=np.float64)
        for t in plan.tiles:
            acc[t.core.y:t.core.y1, t.core.x:t.core.x1] += field.weights_for(t)
        worst = float(np.abs(acc - 1.0).max())
        assert worst <= 1e-6, f"plan {w}x{h}/{tile}/{overlap}: sum off by {worst}"
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"took {elapsed:.1f}s"


@criterion("identity-round-trip (50 canvases to 4096px, <=1 LSB, <120s)")
def test_identity_round_trip():
    started = time.perf_counter()
    gen = np.random.default_rng(7)
    refiner = IdentityRefiner()
    for i in range(50):
        w = int(gen.integers(64, 4097))
        h = int(gen.integers(64, 4097))
        canvas = ImageBuffer.from_array(
            gen.integers(0, 256, (h, w, 3)).astype(np.uint8))
        tile = int(gen.integers(512, 1537))
        overlap = int(gen.integers(64, 129))
        pad = int(gen.integers(0, 33))
        plan = plan_tiles(w, h, tile, overlap, pad)
        field = blend_weights(plan)
        refined = []
        for j, spec in enumerate(plan.tiles):
            tile_buf = crop(canvas, spec.padded.x, spec.padded.y,
                            spec.padded.w, spec.padded.h)
            refined.append((spec, refiner.refine(RefineRequest(image=tile_buf,
                                                               seed=j))))
        out = stitch(refined, plan, field)
        dev = int(np.abs(out.pixels.astype(np.int16)
                         - canvas.pixels.astype(np.int16)).max())
        assert dev <= 1, f"canvas {i}: deviation {dev} LSB"
    elapsed = time.perf_counter() - started
    assert elapsed < 120.0, f"took {elapsed:.1f}s"


@criterion("pair-geometry (10,000 pairs, hr = 4 x lr = 256->64, <10min)")
def test_pair_geometry():
    started = time.perf_counter()
    gen = np.random.default_rng(11)
    sources = [(f"art{i}",
                ImageBuffer.from_array(gen.integers(0, 256, (768, 768, 3))
                                       .astype(np.uint8)))
               for i in range(2)]
    stream = pair_stream(sources, 256, DegradationConfig(), seed=101)
    violations = 0
    for _ in range(10_000):
        pair = next(stream)
        if (pair.hr.width, pair.hr.height) != (256, 256) or \
           (pair.lr.width, pair.lr.height) != (64, 64) or \
           pair.hr.width != 4 * pair.lr.width or \
           pair.hr.height != 4 * pair.lr.height:
            violations += 1
    assert violations == 0
    elapsed = time.perf_counter() - started
    assert elapsed < 600.0, f"took {elapsed:.1f}s"


@criterion("sampler-statistics (quadrant >=90% of 10k; flat passes chi-square)")
def test_sampler_statistics():
    gen = np.random.default_rng(3)
    quad = ImageBuffer.new(512, 512, Layout.RGB, Depth.U8, fill=128)
    quad.pixels[:256, :256, :] = gen.integers(0, 256, (256, 256, 3)).astype(np.uint8)
    wmap = build_weight_map(quad, 128)
    draws = sample_patches(quad, wmap, 10_000, 128, seed=505)
    hits = sum(1 for (x, y), _ in draws if x < 256 and y < 256)
    assert hits / 10_000 >= 0.90, f"only {hits} samples intersect the quadrant"

    flat = ImageBuffer.new(64, 64, Layout.RGB, Depth.U8, fill=77)
    fmap = build_weight_map(flat, 58)   # 7x7 positions
    counts = np.zeros(49)
    for (x, y), _ in sample_patches(flat, fmap, 10_000, 58, seed=99):
        counts[y * 7 + x] += 1
    _, p = scipy.stats.chisquare(counts)
    assert p >= 0.01, f"chi-square p={p}"


@criterion("degradation-neutrality (1,000 patches, mean abs diff <= 2 LSB)")
def test_degradation_neutrality():
    gen = np.random.default_rng(13)
    cfg = neutral_config()
    worst = 0.0
    for i in range(1000):
        hr = ImageBuffer.from_array(gen.integers(0, 256, (64, 64, 3))
                                    .astype(np.uint8))
        lr, _ = degrade(hr, cfg, seed=i)
        oracle = resample(hr, 16, 16, ResampleFilter.BICUBIC)
        mean_diff = float(np.abs(lr.pixels.astype(np.int16)
                                 - oracle.pixels.astype(np.int16)).mean())
        worst = max(worst, mean_diff)
        assert mean_diff <= 2.0
    assert worst <= 2.0


@criterion("alpha-safety (1,000 draws: photometric exact, permutations exact, "
           "no alpha creation)")
def test_alpha_safety():
    gen = np.random.default_rng(17)
    violations = 0
    for i in range(1000):
        w, h = int(gen.integers(16, 49)), int(gen.integers(16, 49))
        px = gen.integers(0, 256, (h, w, 4)).astype(np.uint8)
        px[gen.random((h, w)) < 0.3, 3] = 0
        asset = StencilAsset(
            ImageBuffer.from_array(px, alpha_mode=AlphaMode.STRAIGHT),
            ZRole.FG, LineWeight.MEDIUM, "acc")
        mode = i % 3
        if mode == 0:
            spec = AugmentSpec(brightness=float(gen.uniform(-0.1, 0.1)),
                               contrast=float(gen.uniform(-0.1, 0.1)),
                               grain_sigma=float(gen.uniform(0, 8)),
                               seed=int(gen.integers(2**63)))
            out = alpha_safe_transform(asset, spec)
            if not np.array_equal(out.image.pixels[:, :, 3], px[:, :, 3]):
                violations += 1
        elif mode == 1:
            spec = AugmentSpec(hflip=bool(gen.integers(2)),
                               vflip=bool(gen.integers(2)))
            out = alpha_safe_transform(asset, spec)
            rotated = exact_rotate90(out, int(gen.integers(4)))
            if not np.array_equal(
                    np.sort(rotated.image.pixels[:, :, 3], axis=None),
                    np.sort(px[:, :, 3], axis=None)):
                violations += 1
        else:
            rotation = float(gen.uniform(-15, 15))
            scale = float(gen.uniform(0.85, 1.15))
            out = alpha_safe_transform(
                asset, AugmentSpec(rotation_deg=rotation, scale_factor=scale))
            if _alpha_created_outside_support(px[:, :, 3],
                                              out.image.pixels[:, :, 3],
                                              rotation, scale):
                violations += 1
    assert violations == 0


def _alpha_created_outside_support(src_alpha, out_alpha, rotation_deg, scale):
    h, w = src_alpha.shape
    oh, ow = out_alpha.shape
    theta = math.radians(rotation_deg)
    yo, xo = np.meshgrid(np.arange(oh), np.arange(ow), indexing="ij")
    dx = xo + 0.5 - ow / 2.0
    dy = yo + 0.5 - oh / 2.0
    sx = (math.cos(theta) * dx + math.sin(theta) * dy) / scale + w / 2.0
    sy = (-math.sin(theta) * dx + math.cos(theta) * dy) / scale + h / 2.0
    x0 = np.floor(sx - 0.5).astype(int)
    y0 = np.floor(sy - 0.5).astype(int)
    support = np.zeros((oh, ow), dtype=bool)
    src_a = src_alpha > 0
    for ddy in (0, 1):
        for ddx in (0, 1):
            xs, ys = x0 + ddx, y0 + ddy
            ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
            support |= ok & src_a[np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1)]
    return bool(((out_alpha > 0) & ~support).any())


def _write_synthetic_canvas(path, size):
    """Structured 16384-class canvas, written row-band-wise."""
    xs = np.arange(size, dtype=np.int64)
    with PngRowWriter(path, size, size, Layout.RGB, Depth.U8,
                      compress_level=4) as writer:
        for y0 in range(0, size, 1024):
            ys = np.arange(y0, min(y0 + 1024, size), dtype=np.int64)
            r = (xs[None, :] + ys[:, None]) & 255
            g = ((xs[None, :] * 3) ^ ys[:, None]) & 255
            b = ((xs[None, :] // 7) * 13 + (ys[:, None] // 5) * 7) & 255
            writer.write_rows(np.stack([r, g, b], axis=2).astype(np.uint8))


@criterion("streaming-equivalence (16384x16384, 512 MiB budget, bit-identical)")
def test_streaming_equivalence_and_memory_bound(tmp_path):
    size = 16384
    budget = 512 * 1024 * 1024
    input_path = tmp_path / "big.png"
    output_path = tmp_path / "streamed.png"
    _write_synthetic_canvas(input_path, size)

    schedule = PassSchedule(
        RefinePath.DIFFUSION,
        (Pass("A", 0.31, tile=1024, overlap=128, pad=0, seed=2024),),
        (1.0,))
    refiner = SeededNoiseRefiner(amplitude_lsb=12.0)

    report = stream_process(input_path, output_path, schedule, refiner,
                            memory_budget=budget, target_scale=1.0,
                            compress_level=1)
    assert report.peak_memory_bytes <= budget, \
        f"peak {report.peak_memory_bytes} exceeds budget {budget}"

    from atelier.imaging import decode_png
    in_memory_input = decode_png(input_path)
    expected, _ = run_schedule(in_memory_input, schedule, refiner, 1.0)
    del in_memory_input

    with PngRowReader(output_path) as reader:
        assert (reader.width, reader.height) == (size, size)
        y = 0
        while reader.rows_remaining:
            band = reader.read_rows(1024)
            if not np.array_equal(band, expected.pixels[y:y + band.shape[0]]):
                raise AssertionError(f"streamed output differs in rows {y}..")
            y += band.shape[0]


@criterion("determinism (seeded ops byte-identical across runs and "
           "parallelism 1 vs 8)")
def test_determinism(tmp_path):
    gen = np.random.default_rng(23)
    src = ImageBuffer.from_array(gen.integers(0, 256, (300, 300, 3))
                                 .astype(np.uint8))

    # sampling + degradation + stream
    cfg = DegradationConfig()
    runs = []
    for _ in range(2):
        stream = pair_stream([("s", src)], 64, cfg, seed=31415)
        runs.append([next(stream) for _ in range(25)])
    for a, b in zip(*runs):
        assert np.array_equal(a.hr.pixels, b.hr.pixels)
        assert np.array_equal(a.lr.pixels, b.lr.pixels)
        assert a.provenance == b.provenance

    # pair augmentation
    ops = PairAugmentOps(hflip=True, brightness_range=(-0.1, 0.1),
                         contrast_range=(-0.1, 0.1))
    a1 = augment_pair(runs[0][0], ops, seed=9)
    a2 = augment_pair(runs[1][0], ops, seed=9)
    assert np.array_equal(a1.hr.pixels, a2.hr.pixels)
    assert np.array_equal(a1.lr.pixels, a2.lr.pixels)

    # stencil augmentation
    px = gen.integers(0, 256, (40, 40, 4)).astype(np.uint8)
    asset = StencilAsset(ImageBuffer.from_array(px, alpha_mode=AlphaMode.STRAIGHT),
                         ZRole.FG, LineWeight.THIN, "det")
    spec = AugmentSpec(rotation_deg=7.0, scale_factor=1.05, grain_sigma=4.0,
                       seed=77)
    s1 = alpha_safe_transform(asset, spec)
    s2 = alpha_safe_transform(asset, spec)
    assert np.array_equal(s1.image.pixels, s2.image.pixels)

    # caption transform
    ccfg = CaptionTransformConfig(dropout_p=0.2, token_shuffle=True, seed=55)
    assert caption_transform("a, b, c, d", ccfg) == \
        caption_transform("a, b, c, d", ccfg)

    # schedule with a mock refiner, across two runs and parallelism 1 vs 8
    schedule = PassSchedule(
        RefinePath.DIFFUSION,
        (Pass("A", 0.31, tile=128, overlap=64, pad=16, seed=606),
         Pass("B", 0.20, tile=128, overlap=64, pad=16, seed=607)),
        (2.0,))
    outs = []
    for par in (1, 8, 1):
        out, _ = run_schedule(src, schedule, SeededNoiseRefiner(), 2.0,
                              parallelism=par)
        outs.append(out.pixels)
    assert np.array_equal(outs[0], outs[1])
    assert np.array_equal(outs[0], outs[2])


@criterion("dataset-mechanics (dropout 0.05 +- 0.01; hflip doubles 100; "
           "audit 75/25)")
def test_dataset_mechanics(tmp_path, rng):
    # empirical whole-caption dropout rate over 10,000 seeded draws
    empty = 0
    for seed in range(10_000):
        cfg = CaptionTransformConfig(dropout_p=0.05, token_shuffle=False,
                                     seed=seed)
        if caption_transform("hatching, paper grain, ink", cfg) == "":
            empty += 1
    rate = empty / 10_000
    assert abs(rate - 0.05) <= 0.01, f"dropout rate {rate}"

    # 100-record fixture at the reported 75/25 shape
    from atelier.dataset import audit_ratio, hflip_expand, scan
    from atelier.imaging import encode_png
    root = tmp_path / "corpus"
    for sub, n in (("full", 75), ("detail", 25)):
        (root / sub).mkdir(parents=True)
        for i in range(n):
            encode_png(random_image(rng, 8, 8), root / sub / f"{i:03d}.png")
            (root / sub / f"{i:03d}.txt").write_text("ink drawing, detail")
    records = scan(root).records
    assert len(records) == 100

    audit = audit_ratio(records)
    assert audit["percentages"] == {"full": 75.0, "detail": 25.0}

    expanded = hflip_expand(records, tmp_path / "expanded")
    assert len(expanded) == 200


@criterion("config-envelopes (endpoint denoises clean; outside warns; >1 rejects)")
def test_config_envelopes():
    def schedule_for(name, denoise):
        return PassSchedule(RefinePath.DIFFUSION,
                            (Pass(name, denoise, tile=1024, overlap=96, pad=16),),
                            (2.0,))

    for name, denoise in [("A", 0.25), ("A", 0.37), ("B", 0.17), ("B", 0.23),
                          ("C", 0.13), ("C", 0.17)]:
        assert validate_schedule(schedule_for(name, denoise)) == [], \
            f"{name}@{denoise} should be warning-free"

    for name, denoise in [("A", 0.40), ("A", 0.20), ("B", 0.10), ("C", 0.30)]:
        warnings = validate_schedule(schedule_for(name, denoise))
        assert any("denoise" in w for w in warnings), f"{name}@{denoise}"

    with pytest.raises(errors.ValidationError):
        validate_schedule(schedule_for("A", 1.5))
    with pytest.raises(errors.ValidationError):
        validate_schedule(schedule_for("A", -0.1))
