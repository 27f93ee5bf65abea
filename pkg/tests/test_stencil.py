"""Alpha-safe augmentation and Z-role compositing."""

import math

import numpy as np
import pytest

from atelier import errors
from atelier.imaging import AlphaMode, Depth, ImageBuffer, Layout, decode_png, encode_png
from atelier.stencil import (AugmentSpec, LineWeight, Placement, StencilAsset,
                             ZRole, alpha_safe_transform, composite_assets,
                             exact_rotate90, save_asset, validate_asset)

from conftest import random_image


def make_asset(rng, w=48, h=40, role=ZRole.FG, opaque=False, depth=Depth.U8):
    img = random_image(rng, w, h, Layout.RGBA, depth, AlphaMode.STRAIGHT)
    if opaque:
        img.pixels[:, :, 3] = img.depth.max_value
    else:
        # transparent border, then normal form: color zeroed wherever
        # alpha <= 1 LSB (the same form unpremultiply() produces)
        img.pixels[:4, :, 3] = 0
        img.pixels[:, :4, 3] = 0
        img.pixels[img.pixels[:, :, 3] <= depth.max_value / 255.0, :3] = 0
    return StencilAsset(img, role, LineWeight.MEDIUM, "test")


class TestAlphaSafeTransform:
    def test_identity_spec_bit_identical(self, rng):
        asset = make_asset(rng)
        out = alpha_safe_transform(asset, AugmentSpec())
        assert np.array_equal(out.image.pixels, asset.image.pixels)

    def test_grain_leaves_alpha_bit_exact(self, rng):
        asset = make_asset(rng)
        out = alpha_safe_transform(asset, AugmentSpec(grain_sigma=5.0, seed=3))
        assert np.array_equal(out.image.pixels[:, :, 3], asset.image.pixels[:, :, 3])
        assert not np.array_equal(out.image.pixels[:, :, :3], asset.image.pixels[:, :, :3])

    def test_jitter_leaves_alpha_bit_exact(self, rng):
        asset = make_asset(rng)
        out = alpha_safe_transform(asset, AugmentSpec(brightness=0.08, contrast=-0.05))
        assert np.array_equal(out.image.pixels[:, :, 3], asset.image.pixels[:, :, 3])

    def test_hflip_alpha_is_exact_mirror(self, rng):
        asset = make_asset(rng)
        out = alpha_safe_transform(asset, AugmentSpec(hflip=True))
        assert np.array_equal(out.image.pixels[:, :, 3],
                              asset.image.pixels[:, ::-1, 3])

    def test_flips_and_rot90_permute_alpha(self, rng):
        asset = make_asset(rng)
        flipped = alpha_safe_transform(asset, AugmentSpec(hflip=True, vflip=True))
        rotated = exact_rotate90(asset, 1)
        original = np.sort(asset.image.pixels[:, :, 3], axis=None)
        for out in (flipped, rotated):
            assert np.array_equal(np.sort(out.image.pixels[:, :, 3], axis=None),
                                  original)

    @pytest.mark.parametrize("spec", [
        AugmentSpec(rotation_deg=20.0),
        AugmentSpec(scale_factor=1.3),
        AugmentSpec(scale_factor=0.5),
        AugmentSpec(brightness=0.15),
        AugmentSpec(grain_sigma=-1.0),
    ])
    def test_out_of_bounds_specs_rejected(self, rng, spec):
        asset = make_asset(rng)
        with pytest.raises(errors.SpecOutOfBounds):
            alpha_safe_transform(asset, spec)

    def test_rotation_grows_canvas_without_clipping(self, rng):
        asset = make_asset(rng, 40, 40, opaque=True, depth=Depth.F32)
        out = alpha_safe_transform(asset, AugmentSpec(rotation_deg=15.0))
        assert out.image.width > 40 and out.image.height > 40
        before = float(asset.image.pixels[:, :, 3].sum(dtype=np.float64))
        after = float(out.image.pixels[:, :, 3].sum(dtype=np.float64))
        assert after == pytest.approx(before, rel=0.01)

    def test_no_alpha_creation_outside_kernel_support(self, rng):
        # independent support oracle: an output pixel may carry alpha only
        # if one of its four bilinear taps had alpha in the source
        asset = make_asset(rng, 32, 24)
        asset.image.pixels[:, :, 3] = 0
        asset.image.pixels[8:16, 10:20, 3] = 255
        rotation, scale = 11.0, 1.1
        out = alpha_safe_transform(
            asset, AugmentSpec(rotation_deg=rotation, scale_factor=scale))

        src_a = asset.image.pixels[:, :, 3] > 0
        h, w = 24, 32
        oh, ow = out.image.height, out.image.width
        theta = math.radians(rotation)
        yo, xo = np.meshgrid(np.arange(oh), np.arange(ow), indexing="ij")
        dx = xo + 0.5 - ow / 2.0
        dy = yo + 0.5 - oh / 2.0
        sx = (math.cos(theta) * dx + math.sin(theta) * dy) / scale + w / 2.0
        sy = (-math.sin(theta) * dx + math.cos(theta) * dy) / scale + h / 2.0
        x0 = np.floor(sx - 0.5).astype(int)
        y0 = np.floor(sy - 0.5).astype(int)
        support = np.zeros((oh, ow), dtype=bool)
        for ddy in (0, 1):
            for ddx in (0, 1):
                xs, ys = x0 + ddx, y0 + ddy
                ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
                support |= ok & src_a[np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1)]
        created = (out.image.pixels[:, :, 3] > 0) & ~support
        assert not created.any()


class TestComposite:
    def test_single_fg_equals_asset(self, rng):
        asset = make_asset(rng, 20, 16)
        out = composite_assets([(asset, Placement())], 20, 16)
        assert np.array_equal(out.pixels, asset.image.pixels)

    def test_opaque_fg_wins(self, rng):
        fg = make_asset(rng, 16, 16, ZRole.FG, opaque=True)
        mg = make_asset(rng, 16, 16, ZRole.MG, opaque=True)
        bg = make_asset(rng, 16, 16, ZRole.BG_OVERLAY, opaque=True)
        # supply in scrambled order; draw order is still bg -> mg -> fg
        out = composite_assets([(mg, Placement()), (fg, Placement()),
                                (bg, Placement())], 16, 16)
        assert np.array_equal(out.pixels, fg.image.pixels)

    def test_all_transparent_yields_transparent(self, rng):
        a = make_asset(rng)
        a.image.pixels[:, :, 3] = 0
        out = composite_assets([(a, Placement()), (a, Placement(4, 4))], 64, 64)
        assert np.all(out.pixels[:, :, 3] == 0)

    def test_within_role_permutation_nonoverlapping(self, rng):
        a = make_asset(rng, 8, 8, ZRole.MG, opaque=True)
        b = make_asset(rng, 8, 8, ZRole.MG, opaque=True)
        out1 = composite_assets([(a, Placement(0, 0)), (b, Placement(20, 20))], 32, 32)
        out2 = composite_assets([(b, Placement(20, 20)), (a, Placement(0, 0))], 32, 32)
        assert np.array_equal(out1.pixels, out2.pixels)

    def test_empty_list_raises(self):
        with pytest.raises(errors.EmptyAssetList):
            composite_assets([], 32, 32)

    def test_curriculum_shapes(self, rng):
        # singles, then pairs, then triples all compose cleanly
        solids = [make_asset(rng, 12, 12, role, opaque=True)
                  for role in (ZRole.BG_OVERLAY, ZRole.MG, ZRole.FG)]
        single = composite_assets([(solids[2], Placement())], 48, 48)
        pair = composite_assets([(solids[1], Placement(0, 0)),
                                 (solids[2], Placement(24, 24))], 48, 48)
        triple = composite_assets([(s, Placement(i * 14, i * 14))
                                   for i, s in enumerate(solids)], 48, 48)
        for canvas in (single, pair, triple):
            assert canvas.layout == Layout.RGBA and (canvas.width, canvas.height) == (48, 48)
        assert np.any(triple.pixels[:, :, 3] > 0)

    def test_placement_scaling(self, rng):
        asset = make_asset(rng, 16, 16, opaque=True)
        out = composite_assets([(asset, Placement(0, 0, scale=0.5))], 16, 16)
        assert np.all(out.pixels[:8, :8, 3] == 255)
        assert np.all(out.pixels[10:, 10:, 3] == 0)


class TestValidateAsset:
    def _tree(self, tmp_path, rng):
        d = tmp_path / "assets" / "fg" / "cube" / "thin"
        d.mkdir(parents=True)
        img = random_image(rng, 8, 8, Layout.RGBA)
        encode_png(img, d / "cube01.png")
        (d / "cube01.txt").write_text("a thin cube, fg\n")
        return d / "cube01.png"

    def test_taxonomy_parsing(self, tmp_path, rng):
        path = self._tree(tmp_path, rng)
        asset = validate_asset(path)
        assert asset.z_role == ZRole.FG
        assert asset.line_weight == LineWeight.THIN
        assert asset.category == "cube"
        assert asset.caption == "a thin cube, fg"

    def test_rgb_png_missing_alpha(self, tmp_path, rng):
        d = tmp_path / "fg" / "cat" / "thick"
        d.mkdir(parents=True)
        encode_png(random_image(rng, 8, 8, Layout.RGB), d / "x.png")
        with pytest.raises(errors.MissingAlphaChannel):
            validate_asset(d / "x.png")

    def test_opaque_alpha_is_legal(self, tmp_path, rng):
        d = tmp_path / "mg" / "cloud" / "medium"
        d.mkdir(parents=True)
        img = random_image(rng, 8, 8, Layout.RGBA)
        img.pixels[:, :, 3] = 255
        encode_png(img, d / "y.png")
        asset = validate_asset(d / "y.png")
        assert asset.z_role == ZRole.MG

    def test_unknown_z_role(self, tmp_path, rng):
        d = tmp_path / "weird" / "cat" / "thin"
        d.mkdir(parents=True)
        encode_png(random_image(rng, 8, 8, Layout.RGBA), d / "z.png")
        with pytest.raises(errors.UnknownZRole):
            validate_asset(d / "z.png")

    def test_save_preserves_alpha(self, tmp_path, rng):
        asset = make_asset(rng)
        save_asset(asset, tmp_path / "out.png")
        back = decode_png(tmp_path / "out.png")
        assert back.layout == Layout.RGBA
        assert np.array_equal(back.pixels, asset.image.pixels)
