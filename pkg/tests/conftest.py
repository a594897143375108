import numpy as np
import pytest

from liveprint.config import ToolConfig
from liveprint.modules.classification import Label, LabeledSample
from liveprint.modules.image_core import GrayImage, block_partition
from liveprint.modules.ridge_analysis import orientation_field
from liveprint.modules.segmentation import SegmentationMask
from liveprint.modules.synthetic import SynthKind, SynthSpec, gen_synthetic_fingerprint


@pytest.fixture
def config() -> ToolConfig:
    return ToolConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def parallel_image(size=128, angle=0.0, period=10.0, amplitude=100.0,
                   noise=0.0, blur=0.0, seed=1) -> GrayImage:
    return gen_synthetic_fingerprint(SynthSpec(
        kind=SynthKind.PARALLEL, width=size, height=size, angle=angle, period=period,
        amplitude=amplitude, noise_sigma=noise, blur_sigma=blur, seed=seed,
    ))


def flat_image(size=64, level=128) -> GrayImage:
    return GrayImage.from_array(np.full((size, size), level, dtype=np.uint8))


def full_mask_and_field(img: GrayImage, block_size=16):
    grid = block_partition(img, block_size)
    return SegmentationMask.full(grid), orientation_field(img, grid)


def make_samples(X, is_real, sensor="s1", prefix="x"):
    return [
        LabeledSample(id=f"{prefix}{i}", sensor=sensor,
                      label=Label.REAL if r else Label.FAKE, features=tuple(row))
        for i, (row, r) in enumerate(zip(np.asarray(X), is_real))
    ]


def two_class_data(rng, n_per_class=30, d=3, shift=1.0):
    X = np.vstack([
        rng.normal(0.0, 1.0, size=(n_per_class, d)),
        rng.normal(shift, 1.0, size=(n_per_class, d)),
    ])
    is_real = np.array([True] * n_per_class + [False] * n_per_class)
    return X, is_real
