"""Memory-bounded streaming execution of refinement schedules.

The canvas is processed in row bands of tiles: input rows slide through a
window, each band's tiles are refined and accumulated into a band-local
float32 buffer, finished rows are written incrementally, and the rows
still shared with the next band are carried forward as partial sums.
Stage order and per-pixel arithmetic mirror the in-memory engine exactly,
so streamed output is bit-identical to run_schedule for the same inputs.

Every pixel array the engine allocates is charged to a MemoryMeter; the
peak is reported and the minimum feasible budget is computed up front from
the plan geometry.
"""

from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import (AtelierError, BudgetTooSmall, CapabilityExceeded,
                      DimensionMismatch, RefinerError, UnsupportedPng)
from ..imaging import AlphaMode, ImageBuffer, Layout, ResampleFilter
from ..imaging.buffer import quantize
from ..imaging.png import PngRowReader, PngRowWriter, read_png_header
from ..imaging.resample import _apply_axis, _nearest_axis, axis_taps
from ..refiner_api import RefineRequest, RefinerHandle
from .blend import blend_weights
from .plan import plan_tiles
from .schedule import (PassReport, PassSchedule, RefineStage, ResampleStage,
                       RunReport, compile_stages, validate_schedule)
from .stitch import accumulate_tile

EMIT_CHUNK_ROWS = 64
READ_CHUNK_ROWS = 256


class MemoryMeter:
    """Tracks resident pixel-storage bytes allocated by the streaming engine."""

    def __init__(self):
        self.current = 0
        self.peak = 0
        self._lock = threading.Lock()

    def charge(self, nbytes: int) -> None:
        with self._lock:
            self.current += int(nbytes)
            if self.current > self.peak:
                self.peak = self.current

    def release(self, nbytes: int) -> None:
        with self._lock:
            self.current -= int(nbytes)

    def zeros(self, shape, dtype) -> np.ndarray:
        arr = np.zeros(shape, dtype=dtype)
        self.charge(arr.nbytes)
        return arr

    def adopt(self, arr: np.ndarray) -> np.ndarray:
        self.charge(arr.nbytes)
        return arr

    def free(self, arr: np.ndarray | None) -> None:
        if arr is not None:
            self.release(arr.nbytes)


class _RowWindow:
    """Sliding window of consecutive input rows in one fixed buffer.

    Retained rows are shifted to the front in place (at most the
    inter-band overlap, a small copy) and fresh rows stream into the tail
    in bounded chunks, so the resident cost is one window plus one chunk.
    """

    def __init__(self, reader: PngRowReader, meter: MemoryMeter, capacity: int):
        self.reader = reader
        self.meter = meter
        self.start = 0
        self.count = 0
        self.buf = meter.zeros((capacity, reader.width, reader.channels),
                               reader.depth.dtype)

    def advance(self, y0: int, y1: int) -> None:
        """Make rows [y0, y1) resident; y0 never decreases between calls."""
        drop = y0 - self.start
        if drop > 0:
            keep = self.count - drop
            if keep > 0:
                retained = self.buf[drop:self.count].copy()
                self.meter.charge(retained.nbytes)
                self.buf[:keep] = retained
                self.meter.release(retained.nbytes)
            self.count = max(0, keep)
            self.start = y0
        need = (y1 - y0) - self.count
        while need > 0:
            chunk = self.reader.read_rows(min(need, READ_CHUNK_ROWS))
            self.meter.charge(chunk.nbytes)
            self.buf[self.count:self.count + chunk.shape[0]] = chunk
            self.meter.release(chunk.nbytes)
            self.count += chunk.shape[0]
            need -= chunk.shape[0]

    def slice(self, y0: int, y1: int) -> np.ndarray:
        return self.buf[y0 - self.start: y1 - self.start]

    def close(self) -> None:
        self.meter.release(self.buf.nbytes)
        self.buf = np.empty((0, 1, 1), dtype=np.uint8)


# --- budget math --------------------------------------------------------------

def _refine_stage_min_bytes(stage: RefineStage, channels: int,
                            depth_bytes: int, parallelism: int) -> int:
    plan = plan_tiles(stage.in_w, stage.in_h, stage.pass_.tile,
                      stage.pass_.overlap, stage.pass_.pad)
    sf = stage.scale_factor
    in_row = stage.in_w * channels * depth_bytes
    out_row_f32 = stage.in_w * sf * channels * 4
    out_row_store = stage.in_w * sf * channels * depth_bytes

    window_rows = max(t.padded.h for t in plan.tiles)
    core_h = min(plan.tile, stage.in_h)
    retained_rows = 0
    for r in range(plan.n_rows - 1):
        shared = (min(stage.in_h, plan.ys[r] + core_h + plan.pad)
                  - max(0, plan.ys[r + 1] - plan.pad))
        retained_rows = max(retained_rows, shared)
    window_bytes = (window_rows + min(READ_CHUNK_ROWS, window_rows)
                    + retained_rows) * in_row
    acc_bytes = core_h * sf * out_row_f32

    carry_rows = 0
    for r in range(plan.n_rows - 1):
        carry_rows = max(carry_rows, plan.ys[r] + core_h - plan.ys[r + 1])
    carry_bytes = carry_rows * sf * out_row_f32

    pw = min(plan.tile, stage.in_w) + 2 * plan.pad
    ph = core_h + 2 * plan.pad
    tile_bytes = (pw * ph * channels * depth_bytes              # padded crop
                  + pw * ph * sf * sf * channels * depth_bytes  # refined tile
                  + pw * ph * sf * sf * channels * 4            # refined as f32
                  + plan.tile * plan.tile * sf * sf * channels * 4  # product
                  + plan.tile * plan.tile * sf * sf * 4)        # weights
    emit_bytes = EMIT_CHUNK_ROWS * (3 * out_row_f32 + out_row_store)
    return (window_bytes + acc_bytes + carry_bytes
            + max(1, parallelism) * tile_bytes + emit_bytes)


def _resample_stage_min_bytes(stage: ResampleStage, channels: int,
                              depth_bytes: int) -> int:
    scale_y = stage.out_h / stage.in_h
    support = 3.0 * max(1.0, 1.0 / scale_y)
    window_rows = int(np.ceil(2 * support)) + 2
    hrow_f32 = stage.out_w * channels * 4
    in_row = stage.in_w * channels * (depth_bytes + 4)
    out_row = stage.out_w * channels * (3 * 4 + depth_bytes)
    return 2 * window_rows * hrow_f32 + in_row + EMIT_CHUNK_ROWS * out_row


def minimum_budget(stages, channels: int, depth_bytes: int,
                   parallelism: int = 1) -> int:
    worst = 0
    for stage in stages:
        if isinstance(stage, RefineStage):
            worst = max(worst, _refine_stage_min_bytes(stage, channels,
                                                       depth_bytes, parallelism))
        else:
            worst = max(worst, _resample_stage_min_bytes(stage, channels,
                                                         depth_bytes))
    return worst


# --- stage executors -----------------------------------------------------------

def _emit_rows(writer: PngRowWriter, acc: np.ndarray, depth) -> None:
    for off in range(0, acc.shape[0], EMIT_CHUNK_ROWS):
        writer.write_rows(quantize(acc[off:off + EMIT_CHUNK_ROWS], depth))


def _stream_refine(in_path, out_path, stage: RefineStage, refiner: RefinerHandle,
                   meter: MemoryMeter, parallelism: int,
                   compress_level: int) -> PassReport:
    pass_ = stage.pass_
    caps = refiner.capabilities()
    if pass_.tile + 2 * pass_.pad > caps.max_tile_px:
        raise CapabilityExceeded(
            f"padded tile {pass_.tile + 2 * pass_.pad} exceeds refiner "
            f"max_tile_px {caps.max_tile_px}")
    plan = plan_tiles(stage.in_w, stage.in_h, pass_.tile, pass_.overlap, pass_.pad)
    sf = stage.scale_factor
    splan = plan.scaled(sf)
    sfield = blend_weights(splan)
    report = PassReport(pass_.name, (stage.out_w, stage.out_h), len(plan.tiles))

    with PngRowReader(in_path) as reader:
        layout, depth = reader.layout, reader.depth
        window = _RowWindow(reader, meter,
                            capacity=max(t.padded.h for t in plan.tiles))
        writer = PngRowWriter(out_path, stage.out_w, stage.out_h, layout, depth,
                              compress_level)
        carry: np.ndarray | None = None
        t_start = time.perf_counter()

        def refine_tile(args):
            i, spec, sspec = args
            tile_px = np.ascontiguousarray(
                window.slice(spec.padded.y, spec.padded.y1)
                [:, spec.padded.x:spec.padded.x1, :])
            meter.charge(tile_px.nbytes)
            buf = ImageBuffer(tile_px, layout, depth,
                              _alpha_mode_for(layout))
            req = RefineRequest(image=buf, denoise=pass_.denoise,
                                prompt=pass_.prompt,
                                adapter_scale=pass_.adapter_scale,
                                seed=pass_.seed ^ i, pass_id=pass_.name)
            t0 = time.perf_counter()
            try:
                refined = refiner.refine(req)
            except AtelierError:
                raise
            except Exception as exc:
                raise RefinerError(str(exc), tile_index=(spec.col, spec.row)) from exc
            latency = time.perf_counter() - t0
            if (refined.width, refined.height) != (sspec.padded.w, sspec.padded.h):
                raise DimensionMismatch(
                    f"tile (col={spec.col}, row={spec.row}) refined to "
                    f"{refined.width}x{refined.height}, expected "
                    f"{sspec.padded.w}x{sspec.padded.h}")
            meter.charge(refined.pixels.nbytes)
            return tile_px, refined, latency

        pool = ThreadPoolExecutor(max_workers=parallelism) if parallelism > 1 else None
        try:
            for row in range(plan.n_rows):
                row_specs = [(plan.linear_index(c, row),
                              plan.tiles[plan.linear_index(c, row)],
                              splan.tiles[plan.linear_index(c, row)])
                             for c in range(plan.n_cols)]
                padded_y0 = row_specs[0][1].padded.y
                padded_y1 = row_specs[0][1].padded.y1
                window.advance(padded_y0, padded_y1)

                band_y0 = row_specs[0][2].core.y
                band_y1 = band_y0 + row_specs[0][2].core.h
                acc = meter.zeros((band_y1 - band_y0, splan.canvas_w,
                                   layout.channels), np.float32)
                if carry is not None:
                    acc[:carry.shape[0]] = carry
                    meter.free(carry)
                    carry = None

                # refine in column chunks; accumulate strictly in column order
                for chunk_start in range(0, len(row_specs), max(1, parallelism)):
                    chunk = row_specs[chunk_start:chunk_start + max(1, parallelism)]
                    if pool is not None:
                        results = list(pool.map(refine_tile, chunk))
                    else:
                        results = [refine_tile(args) for args in chunk]
                    for (_, _, sspec), (tile_px, refined, latency) in zip(chunk, results):
                        accumulate_tile(acc, refined, sspec, sfield,
                                        y_offset=band_y0)
                        report.tile_latencies.append(round(latency, 6))
                        meter.release(tile_px.nbytes)
                        meter.release(refined.pixels.nbytes)

                next_y0 = splan.tiles[(row + 1) * plan.n_cols].core.y \
                    if row + 1 < plan.n_rows else band_y1
                _emit_rows(writer, acc[:next_y0 - band_y0], depth)
                if row + 1 < plan.n_rows and band_y1 > next_y0:
                    carry = meter.adopt(acc[next_y0 - band_y0:].copy())
                meter.free(acc)
                del acc
        finally:
            if pool is not None:
                pool.shutdown()
            window.close()
        writer.close()
        report.seconds = time.perf_counter() - t_start
    return report


def _alpha_mode_for(layout):
    return AlphaMode.STRAIGHT if layout == Layout.RGBA else AlphaMode.NONE


def _stream_resample(in_path, out_path, stage: ResampleStage,
                     meter: MemoryMeter, compress_level: int) -> PassReport:
    t_start = time.perf_counter()
    with PngRowReader(in_path) as reader:
        layout, depth = reader.layout, reader.depth
        writer = PngRowWriter(out_path, stage.out_w, stage.out_h, layout, depth,
                              compress_level)
        scale = np.float32(depth.max_value)

        if stage.filter == ResampleFilter.NEAREST:
            ys = _nearest_axis(stage.in_h, stage.out_h)
            xs = _nearest_axis(stage.in_w, stage.out_w)
            read_to = 0
            row_cache = None
            for j in range(stage.out_h):
                while read_to <= ys[j]:
                    if row_cache is not None:
                        meter.release(row_cache.nbytes)
                    row_cache = reader.read_rows(1)
                    meter.charge(row_cache.nbytes)
                    read_to += 1
                writer.write_rows(np.ascontiguousarray(row_cache[:, xs, :]))
            if row_cache is not None:
                meter.release(row_cache.nbytes)
            writer.close()
            return PassReport(f"resample-{stage.out_w}x{stage.out_h}",
                              (stage.out_w, stage.out_h), 0,
                              time.perf_counter() - t_start)

        h_taps = axis_taps(stage.in_w, stage.out_w, stage.filter) \
            if stage.out_w != stage.in_w else None
        v_taps = axis_taps(stage.in_h, stage.out_h, stage.filter) \
            if stage.out_h != stage.in_h else None

        hrows: dict[int, np.ndarray] = {}
        rows_read = 0

        def hpassed_row(y: int) -> np.ndarray:
            nonlocal rows_read
            while rows_read <= y:
                raw = reader.read_rows(1)
                f = raw.astype(np.float32) / scale if depth.dtype != np.float32 \
                    else raw
                if h_taps is not None:
                    f = _apply_axis(f, h_taps[0], h_taps[1], axis=1)
                meter.charge(f.nbytes)
                hrows[rows_read] = f
                rows_read += 1
            return hrows[y]

        def drop_before(y: int) -> None:
            for k in [k for k in hrows if k < y]:
                meter.release(hrows[k].nbytes)
                del hrows[k]

        out_buf = []

        def flush():
            if out_buf:
                writer.write_rows(quantize(np.concatenate(out_buf, axis=0), depth))
                for r in out_buf:
                    meter.release(r.nbytes)
                out_buf.clear()

        for j in range(stage.out_h):
            if v_taps is None:
                row = hpassed_row(j).copy()
                meter.charge(row.nbytes)
                drop_before(j + 1)
            else:
                idx, w = v_taps
                k_count = idx.shape[1]
                drop_before(int(idx[j, 0]) if j else 0)
                row = meter.zeros((1, stage.out_w, reader.channels), np.float32)
                for k in range(k_count // 2):
                    k2 = k_count - 1 - k
                    row += hpassed_row(int(idx[j, k])) * w[j, k] \
                        + hpassed_row(int(idx[j, k2])) * w[j, k2]
                if k_count % 2:
                    mid = k_count // 2
                    row += hpassed_row(int(idx[j, mid])) * w[j, mid]
            out_buf.append(row)
            if len(out_buf) >= EMIT_CHUNK_ROWS:
                flush()
        flush()
        drop_before(stage.in_h)
        writer.close()
    return PassReport(f"resample-{stage.out_w}x{stage.out_h}",
                      (stage.out_w, stage.out_h), 0,
                      time.perf_counter() - t_start)


# --- entry point ----------------------------------------------------------------

def stream_process(input_path, output_path, schedule: PassSchedule,
                   refiner: RefinerHandle, memory_budget: int,
                   target_scale: float | None = None, parallelism: int = 1,
                   compress_level: int = 6) -> RunReport:
    """Run a schedule over a PNG with bounded resident pixel storage.

    Stages chain through temporary PNGs next to the output file, so disk
    holds intermediate canvases while RAM holds only row bands. Raises
    BudgetTooSmall (stating the minimum feasible budget) before any work.
    """
    warnings = validate_schedule(schedule)
    caps = refiner.capabilities()
    header = read_png_header(input_path)
    if header.interlaced:
        raise UnsupportedPng("interlaced PNG input is not row-streamable")
    if target_scale is None:
        import math
        target_scale = math.prod(schedule.step_scales)

    stages, target_dims, fallback = compile_stages(
        header.width, header.height, schedule, caps, target_scale)
    channels = header.channels
    depth_bytes = header.depth.dtype.itemsize
    needed = minimum_budget(stages, channels, depth_bytes, parallelism)
    if memory_budget < needed:
        raise BudgetTooSmall(needed, memory_budget)

    meter = MemoryMeter()
    report = RunReport((header.width, header.height), target_dims,
                       warnings=warnings, fallback_full_frame=fallback,
                       minimum_budget_bytes=needed)
    t_start = time.perf_counter()

    out_dir = os.path.dirname(os.path.abspath(output_path))
    current_in = str(input_path)
    temps = []
    try:
        for i, stage in enumerate(stages):
            is_last = i == len(stages) - 1
            stage_out = str(output_path) if is_last else \
                os.path.join(out_dir, f".{os.path.basename(output_path)}.stage{i}.png")
            if not is_last:
                temps.append(stage_out)
            if isinstance(stage, RefineStage):
                report.passes.append(_stream_refine(
                    current_in, stage_out, stage, refiner, meter, parallelism,
                    compress_level))
            else:
                report.passes.append(_stream_resample(
                    current_in, stage_out, stage, meter, compress_level))
            if current_in not in (str(input_path),):
                os.unlink(current_in)
            current_in = stage_out
    finally:
        for t in temps:
            if t != current_in and os.path.exists(t):
                os.unlink(t)

    report.peak_memory_bytes = meter.peak
    report.total_seconds = time.perf_counter() - t_start
    return report
