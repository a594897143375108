"""
Модуль Segmentation - отделение отпечатка от фона банком фильтров Габора
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from scipy import fft as sp_fft
from scipy import ndimage
from skimage.filters import gabor_kernel

from liveprint.config import Config, GaborBankConfig
from liveprint.errors import EmptyForeground
from liveprint.modules.image_core import BlockGrid, GrayImage, block_partition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentationMask:
    """Поблочная маска переднего плана и центроид блоков переднего плана"""
    grid: BlockGrid
    foreground: np.ndarray  # bool, форма (ny, nx)

    def __post_init__(self):
        foreground = np.asarray(self.foreground, dtype=bool)
        if foreground.shape != (self.grid.ny, self.grid.nx):
            raise ValueError(
                f"mask shape {foreground.shape} does not match grid {self.grid.ny}x{self.grid.nx}"
            )
        object.__setattr__(self, "foreground", foreground)

    @classmethod
    def full(cls, grid: BlockGrid) -> "SegmentationMask":
        return cls(grid=grid, foreground=np.ones((grid.ny, grid.nx), dtype=bool))

    @property
    def count(self) -> int:
        return int(self.foreground.sum())

    @property
    def centroid(self) -> Optional[Tuple[float, float]]:
        """Средний центр блоков переднего плана (None, если их нет)"""
        if not self.foreground.any():
            return None
        cx, cy = self.grid.centers()
        return float(cx[self.foreground].mean()), float(cy[self.foreground].mean())

    def blocks(self):
        """Индексы (bx, by) блоков переднего плана в построчном порядке"""
        ys, xs = np.nonzero(self.foreground)
        return list(zip(xs.tolist(), ys.tolist()))

    def foreground_pixels(self) -> np.ndarray:
        """Попиксельная маска переднего плана размера изображения"""
        return self.grid.expand(self.foreground, fill=False)


def bank_scales(cfg: GaborBankConfig) -> List[Tuple[float, float]]:
    """(частота, sigma) каждого масштаба банка, от крупного к мелкому"""
    return [(cfg.frequency * cfg.scale_ratio ** i, cfg.sigma / cfg.scale_ratio ** i)
            for i in range(cfg.n_scales)]


@lru_cache(maxsize=16)
def gabor_bank(cfg: GaborBankConfig) -> Tuple[Tuple[np.ndarray, ...], ...]:
    """
    Комплексные ядра Габора: для каждого масштаба n_orientations ориентаций в [0, pi)

    Огибающая нормирована на сумму 2: синусоида единичной амплитуды на частоте фильтра
    даёт отклик по модулю около 1.
    """
    bank = []
    for frequency, sigma in bank_scales(cfg):
        kernels = []
        for k in range(cfg.n_orientations):
            theta = k * math.pi / cfg.n_orientations
            kernel = gabor_kernel(frequency, theta=theta, sigma_x=sigma, sigma_y=sigma)
            kernels.append(kernel * (2.0 / np.abs(kernel).sum()))
        bank.append(tuple(kernels))
    return tuple(bank)


def window_margin(cfg: GaborBankConfig) -> int:
    return max(max(k.shape) // 2 for kernels in gabor_bank(cfg) for k in kernels)


def anisotropy(magnitudes) -> float:
    """Признак блока: максимум по масштабам стандартного отклонения по ориентациям"""
    return float(np.max(np.std(np.asarray(magnitudes), axis=-1)))


def gabor_block_feature(img: GrayImage, grid: BlockGrid, bx: int, by: int,
                        cfg: GaborBankConfig) -> float:
    """
    Признак сегментации одного блока по определению с локальным окном

    Окно = блок плюс радиус наибольшего ядра, обрезанное по изображению; из окна
    вычитается среднее блока, вне окна - нули. Для каждого масштаба берётся стандартное
    отклонение по ориентациям средних модулей откликов на пикселях блока.

    Args:
        img: изображение
        grid: сетка блоков
        bx, by: индекс блока
        cfg: параметры банка фильтров
    """
    x0, y0, x1, y1 = grid.rect(bx, by)
    margin = window_margin(cfg)
    wx0, wy0 = max(0, x0 - margin), max(0, y0 - margin)
    wx1, wy1 = min(img.width, x1 + margin), min(img.height, y1 + margin)

    unit = img.to_unit()
    window = unit[wy0:wy1, wx0:wx1] - unit[y0:y1, x0:x1].mean()
    inner = (slice(y0 - wy0, y1 - wy0), slice(x0 - wx0, x1 - wx0))

    magnitudes = []
    for kernels in gabor_bank(cfg):
        row = []
        for kernel in kernels:
            real = ndimage.convolve(window, kernel.real, mode="constant", cval=0.0)
            imag = ndimage.convolve(window, kernel.imag, mode="constant", cval=0.0)
            row.append(np.hypot(real[inner], imag[inner]).mean())
        magnitudes.append(row)
    return anisotropy(magnitudes)


def _fft_shape(height: int, width: int, cfg: GaborBankConfig) -> Tuple[int, int]:
    margin = window_margin(cfg)
    return sp_fft.next_fast_len(height + margin), sp_fft.next_fast_len(width + margin)


def _centered_kernel(kernel: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Ядро с центром в начале координат для циклической свёртки"""
    padded = np.zeros(shape, dtype=np.complex128)
    kh, kw = kernel.shape
    padded[:kh, :kw] = kernel
    return np.roll(padded, (-(kh // 2), -(kw // 2)), axis=(0, 1))


@lru_cache(maxsize=2)
def _bank_spectra(cfg: GaborBankConfig, shape: Tuple[int, int]) -> Tuple[Tuple[np.ndarray, ...], ...]:
    """Спектры ядер банка для изображений одного размера"""
    return tuple(
        tuple(sp_fft.fft2(_centered_kernel(kernel, shape)) for kernel in kernels)
        for kernels in gabor_bank(cfg)
    )


def kernel_support(kernel: np.ndarray, height: int, width: int) -> np.ndarray:
    """
    Сумма ядра по его отсчётам, попадающим в изображение, для каждого выходного пикселя

    Внутри изображения это полная сумма ядра; отличаются только полосы у краёв.
    """
    kh, kw = kernel.shape
    table = np.zeros((kh + 1, kw + 1), dtype=np.complex128)
    table[1:, 1:] = kernel.cumsum(axis=0).cumsum(axis=1)

    def intervals(n: int, k: int):
        pos = np.arange(n)
        lo = np.maximum(pos + k // 2 - (n - 1), 0)
        hi = np.minimum(pos + k // 2, k - 1) + 1
        pairs, inverse = np.unique(np.stack([lo, hi], axis=1), axis=0, return_inverse=True)
        return pairs, inverse.reshape(-1)

    rows, row_class = intervals(height, kh)
    cols, col_class = intervals(width, kw)
    sums = (table[np.ix_(rows[:, 1], cols[:, 1])] - table[np.ix_(rows[:, 0], cols[:, 1])]
            - table[np.ix_(rows[:, 1], cols[:, 0])] + table[np.ix_(rows[:, 0], cols[:, 0])])
    return sums[np.ix_(row_class, col_class)]


def gabor_feature_map(img: GrayImage, grid: BlockGrid, cfg: GaborBankConfig) -> np.ndarray:
    """
    Признак сегментации всех блоков, массив (ny, nx)

    Свёртка всего изображения с нулевым дополнением совпадает с оконным определением
    на пикселях блока: вычитание среднего блока сводится к отклику ядра на единичное
    изображение. Спектр изображения считается один раз на все ядра.
    """
    unit = img.to_unit()
    h, w = grid.covered_shape
    block_mean = grid.expand(grid.block_means(unit), fill=0.0)[:h, :w]
    shape = _fft_shape(img.height, img.width, cfg)
    image_spectrum = sp_fft.fft2(unit, s=shape)

    magnitudes = []
    for kernels, spectra in zip(gabor_bank(cfg), _bank_spectra(cfg, shape)):
        row = []
        for kernel, spectrum in zip(kernels, spectra):
            response = sp_fft.ifft2(image_spectrum * spectrum)[:h, :w]
            support = kernel_support(kernel, img.height, img.width)[:h, :w]
            row.append(grid.block_means(np.abs(response - block_mean * support)))
        magnitudes.append(np.stack(row))
    return np.max(np.std(np.stack(magnitudes), axis=1), axis=0)


def segment(img: GrayImage, cfg: GaborBankConfig,
            block_size: int = Config.DEFAULT_BLOCK_SIZE) -> SegmentationMask:
    """
    Сегментация переднего плана

    Блок относится к переднему плану, если его признак Габора не ниже порога.

    Args:
        img: изображение
        cfg: параметры банка фильтров
        block_size: сторона блока
    """
    grid = block_partition(img, block_size)
    features = gabor_feature_map(img, grid, cfg)
    foreground = features >= cfg.threshold
    logger.debug("segmentation: %d of %d blocks foreground", int(foreground.sum()), grid.n_blocks)
    if not foreground.any():
        raise EmptyForeground("no block passes the Gabor threshold")
    return SegmentationMask(grid=grid, foreground=foreground)


def mask_to_image(mask: SegmentationMask) -> GrayImage:
    """Отладочная маска: один пиксель на блок, передний план 255, фон 0"""
    pixels = np.where(mask.foreground, 255, 0).astype(np.uint8)
    return GrayImage.from_array(pixels)
