"""PNG I/O: whole-image codec plus a streaming row-band reader/writer.

Whole-image decode/encode goes through OpenCV (fast, handles every filter
type and palette expansion). The streaming classes are a minimal
self-contained codec used by the memory-bounded engine: they touch one row
band at a time, so a 3-gigapixel canvas never has to be resident.

The streaming reader vectorizes filter types None/Sub/Up; Average and
Paeth fall back to a per-pixel loop (correct, slow — only foreign files
hit it, our writer always emits Up). The writer emits filter type Up on
every row, which both compresses well on natural images and keeps decode
fully vectorized.

PNG round-trips are bit-exact at the pixel level for U8/U16; F32 buffers
must be converted to an integer depth before encoding.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from ..errors import UnreadableFile, UnsupportedPng
from .buffer import AlphaMode, Depth, ImageBuffer, Layout

_SIGNATURE = b"\x89PNG\r\n\x1a\n"

_COLOR_TYPE_CHANNELS = {0: 1, 2: 3, 4: 2, 6: 4}
_LAYOUT_COLOR_TYPE = {Layout.LUMA: 0, Layout.RGB: 2, Layout.RGBA: 6}
_COLOR_TYPE_LAYOUT = {0: Layout.LUMA, 2: Layout.RGB, 6: Layout.RGBA}


@dataclass(frozen=True)
class PngInfo:
    width: int
    height: int
    bit_depth: int
    color_type: int
    interlaced: bool

    @property
    def channels(self) -> int:
        return _COLOR_TYPE_CHANNELS.get(self.color_type, 3)

    @property
    def depth(self) -> Depth:
        return Depth.U16 if self.bit_depth == 16 else Depth.U8


def read_png_header(path) -> PngInfo:
    """Parse signature + IHDR only; never touches pixel data."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(8 + 8 + 13 + 4)
    except OSError as exc:
        raise UnreadableFile(f"cannot open {path}: {exc}") from exc
    if len(head) < 33 or head[:8] != _SIGNATURE:
        raise UnreadableFile(f"{path} is not a PNG file")
    length, ctype = struct.unpack(">I4s", head[8:16])
    if ctype != b"IHDR" or length != 13:
        raise UnreadableFile(f"{path}: first chunk is not IHDR")
    w, h, bit_depth, color_type, _comp, _filt, interlace = struct.unpack(
        ">IIBBBBB", head[16:29])
    return PngInfo(w, h, bit_depth, color_type, bool(interlace))


# --- whole-image codec -------------------------------------------------------

def decode_png(source) -> ImageBuffer:
    """Decode a PNG file path or bytes into an ImageBuffer (straight alpha)."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        data = np.frombuffer(source, dtype=np.uint8)
    else:
        try:
            data = np.fromfile(str(source), dtype=np.uint8)
        except OSError as exc:
            raise UnreadableFile(f"cannot open {source}: {exc}") from exc
    arr = cv2.imdecode(data, cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise UnreadableFile("PNG decode failed")
    return _from_cv(arr)


def encode_png(img: ImageBuffer, path=None, compress_level: int = 6):
    """Encode to PNG. Writes to `path` when given, else returns bytes."""
    if img.depth == Depth.F32:
        raise UnsupportedPng("PNG stores 8- or 16-bit samples; convert_depth() first")
    ok, data = cv2.imencode(".png", _to_cv(img),
                            [cv2.IMWRITE_PNG_COMPRESSION, compress_level])
    if not ok:
        raise UnsupportedPng("PNG encode failed")
    if path is None:
        return data.tobytes()
    Path(path).write_bytes(data.tobytes())
    return None


def _from_cv(arr: np.ndarray) -> ImageBuffer:
    if arr.ndim == 2:
        return ImageBuffer.from_array(arr[:, :, None])
    if arr.shape[2] == 3:
        return ImageBuffer.from_array(np.ascontiguousarray(arr[:, :, ::-1]))
    if arr.shape[2] == 4:
        return ImageBuffer.from_array(np.ascontiguousarray(arr[:, :, [2, 1, 0, 3]]),
                                      alpha_mode=AlphaMode.STRAIGHT)
    raise UnsupportedPng(f"unsupported channel count {arr.shape[2]}")


def _to_cv(img: ImageBuffer) -> np.ndarray:
    if img.layout == Layout.LUMA:
        return img.pixels[:, :, 0]
    if img.layout == Layout.RGB:
        return np.ascontiguousarray(img.pixels[:, :, ::-1])
    return np.ascontiguousarray(img.pixels[:, :, [2, 1, 0, 3]])


# --- streaming row codec -----------------------------------------------------

class PngRowReader:
    """Sequential row-band access to a non-interlaced 8/16-bit gray/RGB/RGBA PNG."""

    def __init__(self, path):
        self._fh = open(path, "rb")
        try:
            sig = self._fh.read(8)
            if sig != _SIGNATURE:
                raise UnreadableFile(f"{path} is not a PNG file")
            length, ctype, data = self._next_chunk()
            if ctype != b"IHDR":
                raise UnreadableFile(f"{path}: first chunk is not IHDR")
            (self.width, self.height, self.bit_depth, self.color_type,
             comp, filt, interlace) = struct.unpack(">IIBBBBB", data)
            if interlace:
                raise UnsupportedPng("interlaced PNG is not row-streamable here")
            if comp != 0 or filt != 0:
                raise UnsupportedPng("nonstandard PNG compression/filter method")
            if self.color_type not in _COLOR_TYPE_LAYOUT:
                raise UnsupportedPng(
                    f"streaming reader supports gray/RGB/RGBA, got color type {self.color_type}")
            if self.bit_depth not in (8, 16):
                raise UnsupportedPng(f"unsupported bit depth {self.bit_depth}")
        except Exception:
            self._fh.close()
            raise

        self.layout = _COLOR_TYPE_LAYOUT[self.color_type]
        self.depth = Depth.U16 if self.bit_depth == 16 else Depth.U8
        self.channels = self.layout.channels
        self._sample_bytes = self.bit_depth // 8
        self._bpp = self.channels * self._sample_bytes
        self._rowbytes = self.width * self._bpp
        self._decomp = zlib.decompressobj()
        self._pending = bytearray()
        self._prev = np.zeros(self._rowbytes, dtype=np.uint8)
        self._rows_read = 0
        self._idat_done = False

    @property
    def rows_remaining(self) -> int:
        return self.height - self._rows_read

    def _next_chunk(self):
        head = self._fh.read(8)
        if len(head) < 8:
            return None, None, None
        length, ctype = struct.unpack(">I4s", head)
        data = self._fh.read(length)
        self._fh.read(4)  # crc, not verified on the hot path
        return length, ctype, data

    def _fill(self, need: int) -> None:
        while len(self._pending) < need:
            if self._idat_done:
                raise UnreadableFile("PNG pixel stream is truncated")
            _, ctype, data = self._next_chunk()
            if ctype is None or ctype == b"IEND":
                self._pending += self._decomp.flush()
                self._idat_done = True
            elif ctype == b"IDAT":
                self._pending += self._decomp.decompress(data)

    def read_rows(self, count: int) -> np.ndarray:
        """Decode the next `count` rows as (count, width, channels)."""
        count = min(count, self.rows_remaining)
        if count <= 0:
            return np.empty((0, self.width, self.channels), dtype=self.depth.dtype)
        stride = self._rowbytes + 1
        self._fill(count * stride)
        block = np.frombuffer(bytes(self._pending[:count * stride]),
                              dtype=np.uint8).reshape(count, stride)
        del self._pending[:count * stride]

        out = np.empty((count, self._rowbytes), dtype=np.uint8)
        prev = self._prev
        for i in range(count):
            prev = _unfilter_row(int(block[i, 0]), block[i, 1:], prev, self._bpp)
            out[i] = prev
        self._prev = prev
        self._rows_read += count

        if self.bit_depth == 16:
            rows = out.reshape(count, self.width, self.channels, 2)
            return (rows[..., 0].astype(np.uint16) << 8) | rows[..., 1]
        return out.reshape(count, self.width, self.channels)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _unfilter_row(ftype: int, raw: np.ndarray, prev: np.ndarray, bpp: int) -> np.ndarray:
    if ftype == 0:
        return raw.copy()
    if ftype == 2:
        return raw + prev  # uint8 wraparound is the spec'd modulo-256 add
    if ftype == 1:
        lanes = raw.reshape(-1, bpp)
        return (np.cumsum(lanes, axis=0, dtype=np.int64) & 0xFF) \
            .astype(np.uint8).reshape(-1)
    if ftype == 3:
        return _unfilter_average(raw, prev, bpp)
    if ftype == 4:
        return _unfilter_paeth(raw, prev, bpp)
    raise UnreadableFile(f"invalid PNG filter type {ftype}")


def _unfilter_average(raw: np.ndarray, prev: np.ndarray, bpp: int) -> np.ndarray:
    # sequential across pixels; vectorized across the bpp lanes
    r = raw.reshape(-1, bpp).astype(np.int16)
    up = prev.reshape(-1, bpp).astype(np.int16)
    out = np.empty_like(r)
    left = np.zeros(bpp, dtype=np.int16)
    for i in range(r.shape[0]):
        left = (r[i] + ((left + up[i]) >> 1)) & 0xFF
        out[i] = left
    return out.astype(np.uint8).reshape(-1)


def _unfilter_paeth(raw: np.ndarray, prev: np.ndarray, bpp: int) -> np.ndarray:
    r = raw.reshape(-1, bpp).astype(np.int16)
    up = prev.reshape(-1, bpp).astype(np.int16)
    out = np.empty_like(r)
    left = np.zeros(bpp, dtype=np.int16)
    upleft = np.zeros(bpp, dtype=np.int16)
    for i in range(r.shape[0]):
        p = left + up[i] - upleft
        pa, pb, pc = np.abs(p - left), np.abs(p - up[i]), np.abs(p - upleft)
        pred = np.where((pa <= pb) & (pa <= pc), left, np.where(pb <= pc, up[i], upleft))
        left = (r[i] + pred) & 0xFF
        out[i] = left
        upleft = up[i]
    return out.astype(np.uint8).reshape(-1)


class PngRowWriter:
    """Incremental PNG writer; rows go out as they arrive, filter type Up."""

    def __init__(self, path, width: int, height: int, layout: Layout,
                 depth: Depth = Depth.U8, compress_level: int = 6):
        if depth == Depth.F32:
            raise UnsupportedPng("PNG stores 8- or 16-bit samples")
        self.width, self.height = int(width), int(height)
        self.layout, self.depth = layout, depth
        self.channels = layout.channels
        self._bit_depth = 16 if depth == Depth.U16 else 8
        self._rowbytes = self.width * self.channels * (self._bit_depth // 8)
        self._fh = open(path, "wb")
        self._fh.write(_SIGNATURE)
        ihdr = struct.pack(">IIBBBBB", self.width, self.height, self._bit_depth,
                           _LAYOUT_COLOR_TYPE[layout], 0, 0, 0)
        self._write_chunk(b"IHDR", ihdr)
        self._comp = zlib.compressobj(compress_level)
        self._prev = np.zeros(self._rowbytes, dtype=np.uint8)
        self._rows_written = 0
        self._closed = False

    def _write_chunk(self, ctype: bytes, data: bytes) -> None:
        self._fh.write(struct.pack(">I", len(data)))
        self._fh.write(ctype)
        self._fh.write(data)
        self._fh.write(struct.pack(">I", zlib.crc32(ctype + data) & 0xFFFFFFFF))

    def write_rows(self, rows: np.ndarray) -> None:
        rows = np.ascontiguousarray(rows)
        if rows.ndim == 2:
            rows = rows[:, :, None]
        if rows.shape[1:] != (self.width, self.channels) or rows.dtype != self.depth.dtype:
            raise UnsupportedPng(
                f"writer expects (n, {self.width}, {self.channels}) {self.depth.dtype}, "
                f"got {rows.shape} {rows.dtype}")
        if self._rows_written + rows.shape[0] > self.height:
            raise UnsupportedPng("more rows written than the declared height")
        if self.depth == Depth.U16:
            raw = np.ascontiguousarray(rows.astype(">u2")).view(np.uint8)
        else:
            raw = rows
        raw = raw.reshape(rows.shape[0], self._rowbytes)

        filtered = np.empty((rows.shape[0], self._rowbytes + 1), dtype=np.uint8)
        filtered[:, 0] = 2  # Up
        filtered[0, 1:] = raw[0] - self._prev
        if rows.shape[0] > 1:
            filtered[1:, 1:] = raw[1:] - raw[:-1]
        self._prev = raw[-1].copy()
        self._rows_written += rows.shape[0]

        data = self._comp.compress(filtered.tobytes())
        if data:
            self._write_chunk(b"IDAT", data)

    def close(self) -> None:
        if self._closed:
            return
        if self._rows_written != self.height:
            self._fh.close()
            raise UnsupportedPng(
                f"wrote {self._rows_written} rows, declared {self.height}")
        tail = self._comp.flush()
        if tail:
            self._write_chunk(b"IDAT", tail)
        self._write_chunk(b"IEND", b"")
        self._fh.close()
        self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, exc_type, *exc):
        if exc_type is None:
            self.close()
        else:
            self._fh.close()
