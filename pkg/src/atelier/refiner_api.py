"""Pluggable tile refiners: built-in identity/classical, plus the HTTP client.

The engine treats refiners as black boxes that map a tile to a tile whose
dimensions are multiplied by a fixed integer scale factor. In-process
refiners receive the decoded buffer directly; the HTTP client serializes
tiles as base64 PNG inside JSON per the wire protocol:

    POST /v1/refine   {"image", "denoise", "prompt", "adapter_scale",
                       "seed", "pass_id"} -> {"image"}
    GET  /v1/info     capability document
    GET  /v1/health   "ok"
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import requests

from .errors import CapabilityExceeded, ProtocolError, TransportError
from .imaging import (AlphaMode, ImageBuffer, Layout, ResampleFilter,
                      decode_png, encode_png, premultiply, resample,
                      unpremultiply)

DEFAULT_TIMEOUT_SECONDS = 300.0   # diffusion tiles are slow
DEFAULT_RETRIES = 2


@dataclass(frozen=True)
class RefinerCapabilities:
    name: str
    scale_factor: int
    max_tile_px: int
    accepts_prompt: bool
    deterministic_for_seed: bool
    shareable: bool = True        # concurrency metadata extension

    def to_dict(self) -> dict:
        return {"name": self.name, "scale_factor": self.scale_factor,
                "max_tile_px": self.max_tile_px,
                "accepts_prompt": self.accepts_prompt,
                "deterministic_for_seed": self.deterministic_for_seed}


@dataclass
class RefineRequest:
    image: ImageBuffer
    denoise: float = 0.0
    prompt: str = ""
    adapter_scale: float = 1.0
    seed: int = 0
    pass_id: str = ""


@runtime_checkable
class RefinerHandle(Protocol):
    def capabilities(self) -> RefinerCapabilities: ...

    def refine(self, req: RefineRequest) -> ImageBuffer: ...


def validate_request(caps: RefinerCapabilities, req: RefineRequest) -> None:
    if max(req.image.width, req.image.height) > caps.max_tile_px:
        raise CapabilityExceeded(
            f"tile {req.image.width}x{req.image.height} exceeds "
            f"max_tile_px {caps.max_tile_px} of refiner '{caps.name}'")
    if not 0.0 <= req.denoise <= 1.0:
        raise CapabilityExceeded(f"denoise {req.denoise} outside [0, 1]")


class IdentityRefiner:
    """Returns tiles unchanged; the engine's null object and test oracle."""

    def __init__(self, max_tile_px: int = 1 << 20):
        self._caps = RefinerCapabilities("identity", 1, max_tile_px,
                                         accepts_prompt=False,
                                         deterministic_for_seed=True)

    def capabilities(self) -> RefinerCapabilities:
        return self._caps

    def refine(self, req: RefineRequest) -> ImageBuffer:
        validate_request(self._caps, req)
        return req.image


class ClassicalRefiner:
    """Lanczos3 upscaling posing as a refiner (the non-neural baseline)."""

    def __init__(self, scale_factor: int = 4, max_tile_px: int = 4096):
        if scale_factor not in (1, 2, 4):
            raise CapabilityExceeded("built-in refiners support scale 1, 2 or 4")
        self._caps = RefinerCapabilities(f"classical-{scale_factor}x", scale_factor,
                                         max_tile_px, accepts_prompt=False,
                                         deterministic_for_seed=True)

    def capabilities(self) -> RefinerCapabilities:
        return self._caps

    def refine(self, req: RefineRequest) -> ImageBuffer:
        validate_request(self._caps, req)
        img = req.image
        sf = self._caps.scale_factor
        if sf == 1:
            return img
        if img.layout == Layout.RGBA and img.alpha_mode == AlphaMode.STRAIGHT:
            return unpremultiply(resample(premultiply(img), img.width * sf,
                                          img.height * sf, ResampleFilter.LANCZOS3))
        return resample(img, img.width * sf, img.height * sf, ResampleFilter.LANCZOS3)


_INFO_FIELDS = {"name": str, "scale_factor": int, "max_tile_px": int,
                "accepts_prompt": bool, "deterministic_for_seed": bool}


class HttpRefiner:
    """Client for an external refiner service speaking the wire protocol.

    Capabilities are probed once at construction. Transport failures and
    5xx responses are retried with exponential backoff; a retried request
    carries the same seed, so conforming deterministic services return an
    identical tile.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT_SECONDS,
                 retries: int = DEFAULT_RETRIES, session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._session = session or requests.Session()
        self._caps = self._probe()

    def _probe(self) -> RefinerCapabilities:
        try:
            resp = self._session.get(f"{self.endpoint}/v1/info", timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"cannot reach refiner at {self.endpoint}: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(
                f"refiner info endpoint returned HTTP {resp.status_code}")
        try:
            doc = resp.json()
            kwargs = {k: t(doc[k]) for k, t in _INFO_FIELDS.items()}
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed info document: {exc}") from exc
        return RefinerCapabilities(**kwargs)

    def capabilities(self) -> RefinerCapabilities:
        return self._caps

    def refine(self, req: RefineRequest) -> ImageBuffer:
        validate_request(self._caps, req)
        body = {
            "image": base64.b64encode(encode_png(req.image)).decode("ascii"),
            "denoise": req.denoise,
            "prompt": req.prompt,
            "adapter_scale": req.adapter_scale,
            "seed": req.seed,
            "pass_id": req.pass_id,
        }
        resp = self._post_with_retries(body)
        try:
            payload = resp.json()
            tile = decode_png(base64.b64decode(payload["image"]))
        except Exception as exc:
            raise ProtocolError(f"malformed refine response: {exc}") from exc
        want = (req.image.width * self._caps.scale_factor,
                req.image.height * self._caps.scale_factor)
        if (tile.width, tile.height) != want:
            raise ProtocolError(
                f"refiner returned {tile.width}x{tile.height}, expected {want[0]}x{want[1]}")
        return tile

    def _post_with_retries(self, body: dict) -> requests.Response:
        url = f"{self.endpoint}/v1/refine"
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(0.25 * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_exc = TransportError(f"refine request failed: {exc}")
                continue
            if resp.status_code == 200:
                return resp
            if 400 <= resp.status_code < 500:
                try:
                    message = resp.json().get("error", resp.text)
                except ValueError:
                    message = resp.text
                raise ProtocolError(f"refiner rejected request ({resp.status_code}): {message}")
            last_exc = TransportError(f"refiner returned HTTP {resp.status_code}")
        raise last_exc if last_exc else TransportError("refine request failed")


def build_refiner(kind: str, endpoint: str | None = None,
                  scale_factor: int = 4) -> RefinerHandle:
    """Refiner factory used by the CLI config loader."""
    kind = kind.strip().lower()
    if kind == "identity":
        return IdentityRefiner()
    if kind == "classical":
        return ClassicalRefiner(scale_factor)
    if kind == "http":
        if not endpoint:
            raise TransportError("http refiner requires an endpoint")
        return HttpRefiner(endpoint)
    raise CapabilityExceeded(f"unknown refiner kind '{kind}'")
