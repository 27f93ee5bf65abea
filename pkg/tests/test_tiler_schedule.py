"""Pass schedules: validation, envelopes, execution, determinism."""

import numpy as np
import pytest

from atelier import errors
from atelier.imaging import ResampleFilter, resample
from atelier.refiner_api import ClassicalRefiner, IdentityRefiner
from atelier.tiler import (Pass, PassSchedule, RefinePath,
                           default_diffusion_schedule, default_gan_schedule,
                           run_pass, run_schedule, validate_schedule)

from conftest import SeededNoiseRefiner, TargetedNoiseRefiner, random_image


def diffusion(passes, steps=(2.0,), final=False):
    return PassSchedule(RefinePath.DIFFUSION, tuple(passes), tuple(steps), final)


class TestValidation:
    def test_default_schedule_validates_clean(self):
        assert validate_schedule(default_diffusion_schedule()) == []

    @pytest.mark.parametrize("name,denoise", [
        ("A", 0.25), ("A", 0.37), ("B", 0.17), ("B", 0.23),
        ("C", 0.13), ("C", 0.17)])
    def test_envelope_endpoints_no_warnings(self, name, denoise):
        sched = diffusion([Pass(name, denoise, tile=1024, overlap=96)])
        assert validate_schedule(sched) == []

    @pytest.mark.parametrize("name,denoise", [("A", 0.5), ("B", 0.30), ("C", 0.05)])
    def test_outside_envelope_warns(self, name, denoise):
        sched = diffusion([Pass(name, denoise, tile=1024, overlap=96)])
        warnings = validate_schedule(sched)
        assert len(warnings) == 1 and "denoise" in warnings[0]

    def test_geometry_envelope_warnings(self):
        sched = diffusion([Pass("A", 0.31, tile=2048, overlap=256)])
        warnings = validate_schedule(sched)
        assert any("tile" in w for w in warnings)
        assert any("overlap" in w for w in warnings)

    def test_denoise_above_one_rejects(self):
        with pytest.raises(errors.ValidationError):
            validate_schedule(diffusion([Pass("A", 1.5)]))

    def test_overlap_must_be_less_than_tile(self):
        with pytest.raises(errors.ValidationError):
            validate_schedule(diffusion([Pass("A", 0.31, tile=512, overlap=600)]))

    def test_gan_single_pass_only(self):
        with pytest.raises(errors.ValidationError):
            validate_schedule(PassSchedule(
                RefinePath.GAN, (Pass("g", 0.0), Pass("g2", 0.0)), (4.0,)))

    def test_gan_rejects_full_frame_pass(self):
        with pytest.raises(errors.ValidationError):
            validate_schedule(PassSchedule(RefinePath.GAN, (Pass("g", 0.0),),
                                           (4.0,), final_full_frame=True))

    def test_step_scale_range(self):
        with pytest.raises(errors.ValidationError):
            validate_schedule(diffusion([Pass("A", 0.31)], steps=(5.0,)))


class TestRunPass:
    def test_identity_refiner_is_identity(self, rng):
        canvas = random_image(rng, 520, 390)
        p = Pass("A", 0.31, tile=256, overlap=64, pad=16)
        out = run_pass(canvas, p, IdentityRefiner())
        assert np.array_equal(out.pixels, canvas.pixels)

    def test_paper_envelope_pass_with_mock(self, rng):
        canvas = random_image(rng, 1200, 1100)
        p = Pass("A", 0.31, adapter_scale=1.0, tile=1024, overlap=96, pad=16)
        out = run_pass(canvas, p, SeededNoiseRefiner())
        assert (out.width, out.height) == (1200, 1100)
        assert not np.array_equal(out.pixels, canvas.pixels)

    def test_denoise_out_of_range_never_reaches_refiner(self, rng):
        calls = []

        class Recorder(IdentityRefiner):
            def refine(self, req):
                calls.append(req)
                return super().refine(req)

        canvas = random_image(rng, 64, 64)
        with pytest.raises(errors.ValidationError):
            run_pass(canvas, Pass("A", 1.5, tile=64, overlap=0, pad=0), Recorder())
        assert calls == []

    def test_capability_exceeded(self, rng):
        canvas = random_image(rng, 4096, 4096)
        p = Pass("A", 0.31, tile=2048, overlap=64, pad=16)
        with pytest.raises(errors.CapabilityExceeded):
            run_pass(canvas, p, IdentityRefiner(max_tile_px=1536))

    def test_scale4_output_geometry(self, rng):
        canvas = random_image(rng, 200, 120)
        p = Pass("gan", 0.0, tile=512, overlap=64, pad=16)
        out = run_pass(canvas, p, ClassicalRefiner(4))
        assert (out.width, out.height) == (800, 480)


class TestRunSchedule:
    def test_identity_collapses_to_lanczos_chain(self, rng):
        canvas = random_image(rng, 256, 256)
        sched = default_diffusion_schedule(tile=512, overlap=64, pad=16,
                                           step_scales=(2.0, 2.0))
        out, report = run_schedule(canvas, sched, IdentityRefiner(), 4.0)
        oracle = resample(resample(canvas, 512, 512, ResampleFilter.LANCZOS3),
                          1024, 1024, ResampleFilter.LANCZOS3)
        assert (out.width, out.height) == (1024, 1024)
        assert np.array_equal(out.pixels, oracle.pixels)
        assert report.output_dims == (1024, 1024)

    def test_gan_single_step_4x(self, rng):
        canvas = random_image(rng, 128, 96)
        sched = default_gan_schedule(tile=512, overlap=64, pad=16)
        out, report = run_schedule(canvas, sched, ClassicalRefiner(4), 4.0)
        assert (out.width, out.height) == (512, 384)
        # canvas fits one padded tile, so this equals a global Lanczos 4x
        oracle = resample(canvas, 512, 384, ResampleFilter.LANCZOS3)
        assert np.array_equal(out.pixels, oracle.pixels)

    def test_fractional_target_trims_exactly(self, rng):
        canvas = random_image(rng, 100, 100)
        sched = default_diffusion_schedule(tile=512, step_scales=(3.0,))
        out, _ = run_schedule(canvas, sched, IdentityRefiner(), 2.5)
        assert (out.width, out.height) == (250, 250)

    def test_target_unreachable(self, rng):
        canvas = random_image(rng, 64, 64)
        sched = default_diffusion_schedule(step_scales=(2.0,))
        with pytest.raises(errors.TargetUnreachable):
            run_schedule(canvas, sched, IdentityRefiner(), 4.0)

    def test_diffusion_needs_scale1_refiner(self, rng):
        canvas = random_image(rng, 64, 64)
        sched = default_diffusion_schedule(step_scales=(2.0,))
        with pytest.raises(errors.CapabilityExceeded):
            run_schedule(canvas, sched, ClassicalRefiner(4), 2.0)

    def test_final_full_frame_single_tile(self, rng):
        canvas = random_image(rng, 128, 128)
        sched = default_diffusion_schedule(tile=512, step_scales=(2.0,),
                                           final_full_frame=True)
        out, report = run_schedule(canvas, sched, SeededNoiseRefiner(), 2.0)
        assert not report.fallback_full_frame
        assert report.passes[-1].name == "final"
        assert report.passes[-1].tiles == 1

    def test_final_full_frame_fallback_engages(self, rng):
        canvas = random_image(rng, 300, 300)
        sched = default_diffusion_schedule(tile=256, overlap=64, pad=0,
                                           step_scales=(2.0,),
                                           final_full_frame=True)
        refiner = SeededNoiseRefiner(max_tile_px=512)
        out, report = run_schedule(canvas, sched, refiner, 2.0)
        assert report.fallback_full_frame
        assert report.passes[-1].tiles > 1

    def test_deterministic_across_parallelism(self, rng):
        canvas = random_image(rng, 700, 520)
        sched = default_diffusion_schedule(tile=256, overlap=64, pad=16,
                                           step_scales=(2.0,), seed=417)
        outs = []
        for par in (1, 8):
            out, _ = run_schedule(canvas, sched, SeededNoiseRefiner(), 2.0,
                                  parallelism=par)
            outs.append(out)
        assert np.array_equal(outs[0].pixels, outs[1].pixels)

    def test_seed_isolation_to_tile_footprint(self, rng):
        canvas = random_image(rng, 700, 520)
        pass_seed = 90210
        p = Pass("A", 0.31, tile=256, overlap=64, pad=16, seed=pass_seed)
        plan_cols = 4  # 700px with stride 192 -> positions 0,192,384,444 -> 4 cols
        target_index = 1 * plan_cols + 2  # tile (col=2, row=1)
        base = run_pass(canvas, p, TargetedNoiseRefiner(special_seed=None))
        noisy = run_pass(canvas, p,
                         TargetedNoiseRefiner(special_seed=pass_seed ^ target_index))
        diff = np.any(base.pixels != noisy.pixels, axis=2)
        from atelier.tiler import plan_tiles
        plan = plan_tiles(700, 520, 256, 64, 16)
        spec = plan.tiles[target_index]
        outside = diff.copy()
        outside[spec.core.y:spec.core.y1, spec.core.x:spec.core.x1] = False
        assert diff[spec.core.y:spec.core.y1, spec.core.x:spec.core.x1].any()
        assert not outside.any()
