"""Refinement backends behind the wire protocol.

The two mock modes are pure numpy and bit-deterministic for a fixed
(tile, seed, denoise). The real modes wrap a TorchScript module when a
model path is configured; without one they fall back to deterministic
CPU stand-ins (classical Lanczos 4x for the SR mode, seeded grain for
img2img) so the protocol can be exercised end-to-end without weights.
"""

from __future__ import annotations

import threading

import cv2
import numpy as np

from .config import Mode, ServiceConfig


class BackendError(Exception):
    """Wrapped model failure; surfaces as HTTP 500."""


def decode_tile(png_bytes: bytes) -> np.ndarray:
    arr = cv2.imdecode(np.frombuffer(png_bytes, np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise ValueError("payload is not a decodable PNG")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    elif arr.shape[2] == 3:
        arr = np.ascontiguousarray(arr[:, :, ::-1])
    elif arr.shape[2] == 4:
        arr = np.ascontiguousarray(arr[:, :, [2, 1, 0, 3]])
    return arr


def encode_tile(arr: np.ndarray) -> bytes:
    if arr.shape[2] == 1:
        raw = arr[:, :, 0]
    elif arr.shape[2] == 3:
        raw = np.ascontiguousarray(arr[:, :, ::-1])
    else:
        raw = np.ascontiguousarray(arr[:, :, [2, 1, 0, 3]])
    ok, blob = cv2.imencode(".png", raw)
    if not ok:
        raise BackendError("PNG encode failed")
    return blob.tobytes()


def _seeded_grain(tile: np.ndarray, seed: int, denoise: float,
                  amplitude_lsb: float) -> np.ndarray:
    """Grain on the color channels only, amplitude scaled by denoise."""
    if denoise <= 0.0:
        return tile
    gen = np.random.default_rng(seed)
    color_ch = 3 if tile.shape[2] >= 3 else 1
    scale = float(np.iinfo(tile.dtype).max) if tile.dtype != np.float32 else 1.0
    noise = gen.normal(0.0, amplitude_lsb * denoise / 255.0,
                       (*tile.shape[:2], color_ch)).astype(np.float32)
    out = tile.astype(np.float32)
    out[:, :, :color_ch] += noise * scale
    out = np.clip(out, 0, scale)
    return np.rint(out).astype(tile.dtype) if tile.dtype != np.float32 else out


class Backend:
    """Maps wire parameters onto the configured refinement mode."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self._model = None
        self._model_lock = threading.Lock()   # one in-flight model invocation
        if config.model and config.mode in (Mode.ESRGAN_4X,
                                            Mode.DIFFUSION_IMG2IMG):
            self._model = self._load_model(config.model)

    @staticmethod
    def _load_model(path: str):
        try:
            import torch
            return torch.jit.load(path, map_location="cpu").eval()
        except Exception as exc:
            raise BackendError(f"cannot load model '{path}': {exc}") from exc

    def refine(self, tile: np.ndarray, denoise: float, prompt: str,
               adapter_scale: float, seed: int) -> np.ndarray:
        mode = self.config.mode
        if mode == Mode.MOCK_IDENTITY:
            return tile
        if mode == Mode.MOCK_TEXTURE:
            return _seeded_grain(tile, seed, denoise,
                                 self.config.texture_amplitude_lsb)
        if mode == Mode.ESRGAN_4X:
            if self._model is not None:
                return self._run_model_sr(tile)
            # no weights configured: classical 4x keeps the protocol honest
            h, w = tile.shape[:2]
            out = cv2.resize(tile, (w * 4, h * 4),
                             interpolation=cv2.INTER_LANCZOS4)
            return out[:, :, None] if out.ndim == 2 else out
        # diffusion img2img fallback: grain standing in for injected texture
        if self._model is not None:
            return self._run_model_img2img(tile, denoise, prompt, adapter_scale,
                                           seed)
        return _seeded_grain(tile, seed, denoise,
                             self.config.texture_amplitude_lsb * adapter_scale)

    def _run_model_sr(self, tile: np.ndarray) -> np.ndarray:
        import torch
        with self._model_lock:
            try:
                x = torch.from_numpy(tile.astype(np.float32) / 255.0) \
                    .permute(2, 0, 1).unsqueeze(0)
                with torch.no_grad():
                    y = self._model(x)
                out = y.squeeze(0).permute(1, 2, 0).clamp(0, 1).numpy()
                return np.rint(out * 255.0).astype(np.uint8)
            except Exception as exc:
                raise BackendError(f"SR model failed: {exc}") from exc

    def _run_model_img2img(self, tile, denoise, prompt, adapter_scale, seed):
        import torch
        with self._model_lock:
            try:
                torch.manual_seed(seed)
                x = torch.from_numpy(tile.astype(np.float32) / 255.0) \
                    .permute(2, 0, 1).unsqueeze(0)
                with torch.no_grad():
                    y = self._model(x, torch.tensor(float(denoise)),
                                    torch.tensor(float(adapter_scale)))
                out = y.squeeze(0).permute(1, 2, 0).clamp(0, 1).numpy()
                return np.rint(out * 255.0).astype(np.uint8)
            except Exception as exc:
                raise BackendError(f"img2img model failed: {exc}") from exc
