import numpy as np
import pytest

from atelier.imaging import AlphaMode, Depth, ImageBuffer, Layout
from atelier.refiner_api import RefinerCapabilities, validate_request


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class SeededNoiseRefiner:
    """Scale-1 mock that adds seed- and denoise-dependent grain.

    Stands in for a diffusion tile refiner so engine tests can observe
    pass effects and seed locality without any model.
    """

    def __init__(self, amplitude_lsb: float = 12.0, max_tile_px: int = 1 << 20):
        self.amplitude = amplitude_lsb
        self._caps = RefinerCapabilities("mock-noise", 1, max_tile_px,
                                         accepts_prompt=True,
                                         deterministic_for_seed=True)

    def capabilities(self):
        return self._caps

    def refine(self, req):
        validate_request(self._caps, req)
        img = req.image
        gen = np.random.default_rng(req.seed)
        noise = gen.normal(0.0, self.amplitude * req.denoise / 255.0,
                           img.pixels.shape).astype(np.float32)
        return img.with_f32(img.to_f32() + noise)


class TargetedNoiseRefiner(SeededNoiseRefiner):
    """Identity everywhere except for one specific per-tile seed."""

    def __init__(self, special_seed, **kwargs):
        super().__init__(**kwargs)
        self.special_seed = special_seed

    def refine(self, req):
        if req.seed != self.special_seed:
            return req.image
        return super().refine(req)


def random_image(rng, w, h, layout=Layout.RGB, depth=Depth.U8,
                 alpha_mode=None) -> ImageBuffer:
    if depth == Depth.F32:
        arr = rng.random((h, w, layout.channels), dtype=np.float32)
    else:
        arr = rng.integers(0, int(depth.max_value) + 1,
                           (h, w, layout.channels)).astype(depth.dtype)
    return ImageBuffer.from_array(arr, alpha_mode=alpha_mode)


def constant_image(w, h, value, layout=Layout.RGB, depth=Depth.U8) -> ImageBuffer:
    return ImageBuffer.new(w, h, layout, depth, fill=value)
