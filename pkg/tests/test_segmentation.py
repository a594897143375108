import numpy as np
import pytest
from scipy import ndimage

from conftest import flat_image, parallel_image
from liveprint.errors import EmptyForeground
from liveprint.modules.image_core import GrayImage, block_partition
from liveprint.modules.segmentation import (
    SegmentationMask,
    bank_scales,
    gabor_bank,
    gabor_block_feature,
    gabor_feature_map,
    kernel_support,
    mask_to_image,
    segment,
)
from liveprint.modules.synthetic import SynthKind, SynthSpec, disc_ground_truth, gen_synthetic_fingerprint


class TestGaborBank:
    def test_orientations_and_gain(self, config):
        bank = gabor_bank(config.gabor)
        assert len(bank) == config.gabor.n_scales
        for kernels in bank:
            assert len(kernels) == config.gabor.n_orientations
            for kernel in kernels:
                assert np.iscomplexobj(kernel)
                assert np.abs(kernel).sum() == pytest.approx(2.0)

    def test_scales_keep_relative_bandwidth(self, config):
        scales = bank_scales(config.gabor)
        assert scales[0] == pytest.approx((0.1, 4.0))
        assert scales[1] == pytest.approx((0.2, 2.0))
        assert len({round(f * s, 9) for f, s in scales}) == 1

    def test_window_definition_matches_whole_image_path(self, config):
        img = parallel_image(size=96, angle=25.0, noise=10.0, seed=3)
        grid = block_partition(img, 16)
        fast = gabor_feature_map(img, grid, config.gabor)
        for bx, by in [(0, 0), (2, 3), (5, 5), (5, 0)]:
            assert gabor_block_feature(img, grid, bx, by, config.gabor) == pytest.approx(
                fast[by, bx], abs=1e-9)

    def test_window_definition_on_uneven_image(self, config, rng):
        img = GrayImage.from_array(128 + rng.normal(0, 30, size=(70, 53)))
        grid = block_partition(img, 16)
        fast = gabor_feature_map(img, grid, config.gabor)
        assert fast.shape == (4, 3)
        for bx, by in [(0, 0), (2, 3), (1, 2)]:
            assert gabor_block_feature(img, grid, bx, by, config.gabor) == pytest.approx(
                fast[by, bx], abs=1e-9)

    def test_kernel_support(self, config):
        kernel = gabor_bank(config.gabor)[0][3]
        support = kernel_support(kernel, 40, 50)
        assert support[20, 25] == pytest.approx(kernel.sum())
        # Угловой пиксель видит четверть ядра до центра включительно
        cy, cx = kernel.shape[0] // 2, kernel.shape[1] // 2
        assert support[0, 0] == pytest.approx(kernel[:cy + 1, :cx + 1].sum())
        ones = np.ones((40, 50))
        direct = (ndimage.convolve(ones, kernel.real, mode="constant")
                  + 1j * ndimage.convolve(ones, kernel.imag, mode="constant"))
        np.testing.assert_allclose(support, direct, atol=1e-12)

    def test_constant_block_has_zero_feature(self, config):
        img = flat_image(64, level=90)
        grid = block_partition(img, 16)
        assert gabor_block_feature(img, grid, 1, 2, config.gabor) == pytest.approx(0.0, abs=1e-12)

    def test_offset_invariance(self, config):
        img = parallel_image(size=64, amplitude=50.0, noise=5.0)
        brighter = GrayImage.from_array(img.pixels.astype(np.float64) + 40)
        grid = block_partition(img, 16)
        assert gabor_block_feature(brighter, grid, 1, 1, config.gabor) == pytest.approx(
            gabor_block_feature(img, grid, 1, 1, config.gabor), abs=1e-12)

    def test_ridges_beat_noise_of_equal_variance(self, config):
        ridges = parallel_image(size=64, amplitude=40.0)
        grid = block_partition(ridges, 16)
        ridge_feature = gabor_feature_map(ridges, grid, config.gabor)[1, 1]
        for seed in range(100):
            noise = gen_synthetic_fingerprint(SynthSpec(kind=SynthKind.NOISE, width=64, height=64,
                                                        amplitude=40.0, seed=seed))
            assert gabor_feature_map(noise, grid, config.gabor)[1, 1] < ridge_feature


class TestThresholdCalibration:
    @pytest.mark.parametrize("period", [4.0, 5.0, 7.0, 10.0, 14.0, 17.0, 20.0])
    @pytest.mark.parametrize("angle", [0.0, 30.0, 45.0, 100.0])
    def test_faint_ridges_are_foreground(self, config, period, angle):
        img = parallel_image(size=64, angle=angle, period=period, amplitude=8.0)
        grid = block_partition(img, 16)
        features = gabor_feature_map(img, grid, config.gabor)
        assert features.min() >= config.gabor.threshold

    def test_sensor_noise_is_background(self, config):
        for seed in range(5):
            noise = np.random.default_rng(seed).normal(0, 2.0, size=(128, 128))
            img = GrayImage.from_array(128 + noise)
            grid = block_partition(img, 16)
            assert gabor_feature_map(img, grid, config.gabor).max() < config.gabor.threshold


class TestSegment:
    def test_ridges_are_foreground(self, config):
        mask = segment(parallel_image(size=128), config.gabor)
        assert mask.count == mask.grid.n_blocks

    def test_flat_image_has_no_foreground(self, config):
        with pytest.raises(EmptyForeground):
            segment(flat_image(64), config.gabor)

    def test_disc_on_flat_matches_geometry(self, config):
        spec = SynthSpec(kind=SynthKind.DISC_ON_FLAT, width=256, height=256, period=10.0,
                         amplitude=100.0, seed=5)
        mask = segment(gen_synthetic_fingerprint(spec), config.gabor)
        truth = disc_ground_truth(spec, mask.grid)
        intersection = np.sum(mask.foreground & truth.foreground)
        union = np.sum(mask.foreground | truth.foreground)
        assert intersection / union >= 0.8

    def test_centroid_of_symmetric_disc_is_central(self, config):
        spec = SynthSpec(kind=SynthKind.DISC_ON_FLAT, width=128, height=128, seed=2)
        mask = segment(gen_synthetic_fingerprint(spec), config.gabor)
        cx, cy = mask.centroid
        assert cx == pytest.approx(63.5, abs=8.0)
        assert cy == pytest.approx(63.5, abs=8.0)

    def test_centroid_inside_foreground_box(self, config):
        spec = SynthSpec(kind=SynthKind.MIXED, width=128, height=96, noise_sigma=3.0, seed=8)
        mask = segment(gen_synthetic_fingerprint(spec), config.gabor)
        ys, xs = np.nonzero(mask.foreground)
        cx, cy = mask.centroid
        assert xs.min() * 16 <= cx <= (xs.max() + 1) * 16
        assert ys.min() * 16 <= cy <= (ys.max() + 1) * 16

    def test_threshold_from_config(self, config):
        img = parallel_image(size=64)
        strict = config.gabor.model_copy(update={"threshold": 10.0})
        with pytest.raises(EmptyForeground):
            segment(img, strict)

    def test_lower_threshold_never_shrinks_foreground(self, config):
        spec = SynthSpec(kind=SynthKind.MIXED, width=128, height=128, amplitude=30.0,
                         noise_sigma=4.0, blur_sigma=1.0, seed=11)
        img = gen_synthetic_fingerprint(spec)
        previous = None
        for threshold in (0.02, 0.01, 0.003, 0.001):
            mask = segment(img, config.gabor.model_copy(update={"threshold": threshold}))
            if previous is not None:
                assert np.all(mask.foreground | ~previous)
            previous = mask.foreground

    def test_shift_by_one_block_shifts_mask(self, config):
        spec = SynthSpec(kind=SynthKind.DISC_ON_FLAT, width=160, height=160, seed=3)
        pixels = gen_synthetic_fingerprint(spec).pixels
        original = segment(GrayImage.from_array(pixels), config.gabor)
        shifted = segment(GrayImage.from_array(np.roll(pixels, (16, 16), axis=(0, 1))), config.gabor)
        np.testing.assert_array_equal(shifted.foreground[1:, 1:], original.foreground[:-1, :-1])


class TestMask:
    def test_mask_shape_checked(self):
        grid = block_partition(flat_image(64), 16)
        with pytest.raises(ValueError):
            SegmentationMask(grid=grid, foreground=np.ones((3, 4), dtype=bool))

    def test_empty_mask_centroid(self):
        grid = block_partition(flat_image(64), 16)
        assert SegmentationMask(grid=grid, foreground=np.zeros((4, 4), dtype=bool)).centroid is None

    def test_debug_image(self):
        grid = block_partition(flat_image(64), 16)
        foreground = np.zeros((4, 4), dtype=bool)
        foreground[1, 2] = True
        img = mask_to_image(SegmentationMask(grid=grid, foreground=foreground))
        assert img.shape == (4, 4)
        assert img.pixels[1, 2] == 255
        assert img.pixels.sum() == 255

    def test_foreground_pixels(self):
        grid = block_partition(flat_image(40), 16)
        mask = SegmentationMask.full(grid)
        pixels = mask.foreground_pixels()
        assert pixels.shape == (40, 40)
        assert pixels[:32, :32].all()
        assert not pixels[32:, :].any()
