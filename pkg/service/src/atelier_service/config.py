"""Service configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class Mode(Enum):
    MOCK_IDENTITY = "mock-identity"
    MOCK_TEXTURE = "mock-texture"
    ESRGAN_4X = "esrgan-4x"
    DIFFUSION_IMG2IMG = "diffusion-img2img"

    @property
    def scale_factor(self) -> int:
        return 4 if self == Mode.ESRGAN_4X else 1

    @property
    def accepts_prompt(self) -> bool:
        return self == Mode.DIFFUSION_IMG2IMG


@dataclass(frozen=True)
class ServiceConfig:
    mode: Mode = Mode.MOCK_IDENTITY
    max_tile_px: int = 2048
    model: str | None = None        # TorchScript path for the real modes
    host: str = "127.0.0.1"
    port: int = 8571
    texture_amplitude_lsb: float = 12.0

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(mode=Mode(raw.get("mode", "mock-identity")),
                   max_tile_px=int(raw.get("max_tile_px", 2048)),
                   model=raw.get("model"),
                   host=raw.get("host", "127.0.0.1"),
                   port=int(raw.get("port", 8571)),
                   texture_amplitude_lsb=float(raw.get("texture_amplitude_lsb", 12.0)))

    def info(self) -> dict:
        name = {Mode.MOCK_IDENTITY: "mock-identity",
                Mode.MOCK_TEXTURE: "mock-texture",
                Mode.ESRGAN_4X: "esrgan-4x",
                Mode.DIFFUSION_IMG2IMG: "diffusion-img2img"}[self.mode]
        return {
            "name": name,
            "scale_factor": self.mode.scale_factor,
            "max_tile_px": self.max_tile_px,
            "accepts_prompt": self.mode.accepts_prompt,
            "deterministic_for_seed": True,
        }
