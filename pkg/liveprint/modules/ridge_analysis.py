"""
Модуль Ridge Analysis - общие численные ядра

Градиенты, поле ориентаций, ковариация градиента, кольцевой профиль спектра мощности
и синусоидальная модель гребней/впадин.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from liveprint.config import SinusoidConfig, SpectrumConfig
from liveprint.errors import DegenerateBlock, ImageTooSmall, ZeroEnergy
from liveprint.modules.image_core import BlockGrid, GrayImage

logger = logging.getLogger(__name__)

# Коэффициент усиления оператора Собеля на линейном поле
SOBEL_GAIN = 8.0
# Блоки с меньшей энергией градиента считаются вырожденными
_DEGENERATE_ENERGY = 1e-12
# Допуск на округление координат выборок у края изображения
_EDGE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GradientField:
    """Попиксельный градиент (gx вдоль столбцов, gy вдоль строк)"""
    gx: np.ndarray
    gy: np.ndarray


@dataclass(frozen=True)
class OrientationField:
    """
    Поле направлений гребней

    theta - угол гребня в [0, pi) от горизонтальной оси для каждого блока,
    degenerate - блоки без энергии градиента (theta = 0, не участвуют в агрегации)
    """
    grid: BlockGrid
    theta: np.ndarray
    degenerate: np.ndarray

    @classmethod
    def from_angles(cls, grid: BlockGrid, theta, degenerate=None) -> "OrientationField":
        theta = wrap_angle(theta)
        if theta.shape != (grid.ny, grid.nx):
            raise ValueError(f"theta shape {theta.shape} does not match grid {grid.ny}x{grid.nx}")
        if degenerate is None:
            degenerate = np.zeros(theta.shape, dtype=bool)
        return cls(grid=grid, theta=theta, degenerate=np.asarray(degenerate, dtype=bool))


@dataclass(frozen=True)
class GradientCovariance:
    """Матрица вторых моментов градиента блока и её собственные значения"""
    jxx: float
    jxy: float
    jyy: float
    lambda_max: float
    lambda_min: float


@dataclass(frozen=True)
class SpectralProfile:
    """Нормированные энергии колец и их энтропия (натуральный логарифм)"""
    ring_energies: np.ndarray
    entropy: float
    ring_centers: np.ndarray
    total_energy: float


@dataclass(frozen=True)
class SinusoidFit:
    """Параметры синусоиды, аппроксимирующей x-сигнатуру (в уровнях серого)"""
    amplitude: float
    period: float
    residual_variance: float
    valid: bool
    mean_level: float
    cos_coef: float
    sin_coef: float

    def model(self, s: np.ndarray) -> np.ndarray:
        """Значение подобранной синусоиды в позициях s поперёк гребней"""
        phase = 2.0 * math.pi * np.asarray(s, dtype=np.float64) / self.period
        return self.mean_level + self.cos_coef * np.cos(phase) + self.sin_coef * np.sin(phase)


@dataclass(frozen=True)
class XSignature:
    """
    X-сигнатура блока

    window - выборки окна (строки поперёк гребней, столбцы вдоль гребней, NaN вне изображения),
    values - среднее строки окна по выборкам внутри изображения
    """
    window: np.ndarray
    values: np.ndarray


def compute_gradients(img: GrayImage) -> GradientField:
    """
    Градиенты Собеля 3x3 на нормированном сером с повтором краёв

    Отклик делится на SOBEL_GAIN: для рампы I(x, y) = x/255 gx = 1/255.
    """
    if img.width < 3 or img.height < 3:
        raise ImageTooSmall(f"gradients need at least 3x3 pixels, got {img.width}x{img.height}")
    unit = img.to_unit()
    gx = ndimage.sobel(unit, axis=1, mode="nearest") / SOBEL_GAIN
    gy = ndimage.sobel(unit, axis=0, mode="nearest") / SOBEL_GAIN
    return GradientField(gx=gx, gy=gy)


def block_covariances(gradients: GradientField, grid: BlockGrid) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Суммы jxx, jxy, jyy по всем блокам сетки, массивы (ny, nx)"""
    gx, gy = gradients.gx, gradients.gy
    return (
        grid.block_sums(gx * gx),
        grid.block_sums(gx * gy),
        grid.block_sums(gy * gy),
    )


def eigenvalues(jxx, jxy, jyy) -> Tuple[np.ndarray, np.ndarray]:
    """Собственные значения симметричной 2x2 матрицы в замкнутой форме"""
    jxx = np.asarray(jxx, dtype=np.float64)
    jxy = np.asarray(jxy, dtype=np.float64)
    jyy = np.asarray(jyy, dtype=np.float64)
    half_trace = (jxx + jyy) / 2.0
    disc = np.hypot((jxx - jyy) / 2.0, jxy)
    lambda_max = half_trace + disc
    det = np.maximum(jxx * jyy - jxy * jxy, 0.0)
    # Через определитель: устойчиво и неотрицательно
    with np.errstate(divide="ignore", invalid="ignore"):
        lambda_min = np.where(lambda_max > 0, det / np.where(lambda_max > 0, lambda_max, 1.0), 0.0)
    return lambda_max, lambda_min


def gradient_covariance_block(gradients: GradientField, grid: BlockGrid, bx: int, by: int) -> GradientCovariance:
    """
    Ковариация градиента одного блока

    Args:
        gradients: поле градиентов изображения
        grid: сетка блоков
        bx, by: индекс блока
    """
    x0, y0, x1, y1 = grid.rect(bx, by)
    gx = gradients.gx[y0:y1, x0:x1]
    gy = gradients.gy[y0:y1, x0:x1]
    jxx = float(np.sum(gx * gx))
    jxy = float(np.sum(gx * gy))
    jyy = float(np.sum(gy * gy))
    lambda_max, lambda_min = eigenvalues(jxx, jxy, jyy)
    return GradientCovariance(
        jxx=jxx, jxy=jxy, jyy=jyy,
        lambda_max=float(lambda_max), lambda_min=float(lambda_min),
    )


def orientation_field(img: GrayImage, grid: BlockGrid,
                      gradients: Optional[GradientField] = None) -> OrientationField:
    """
    Поле направлений методом усреднения удвоенного угла

    theta = 1/2 * atan2(sum 2 gx gy, sum (gx^2 - gy^2)) + pi/2 по модулю pi.
    """
    if gradients is None:
        gradients = compute_gradients(img)
    jxx, jxy, jyy = block_covariances(gradients, grid)
    theta = wrap_angle(0.5 * np.arctan2(2.0 * jxy, jxx - jyy) + math.pi / 2.0)
    degenerate = (jxx + jyy) <= _DEGENERATE_ENERGY
    theta = np.where(degenerate, 0.0, theta)
    if degenerate.any():
        logger.debug("%d degenerate orientation blocks", int(degenerate.sum()))
    return OrientationField(grid=grid, theta=theta, degenerate=degenerate)


def wrap_angle(theta):
    """Приведение угла к [0, pi)"""
    theta = np.mod(np.asarray(theta, dtype=np.float64), math.pi)
    return np.where(theta >= math.pi, 0.0, theta)


def angle_difference(a, b):
    """Круговая разность направлений по модулю pi, значения в [0, pi/2]"""
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), math.pi))
    return np.minimum(d, math.pi - d)


def ring_edges(cfg: SpectrumConfig) -> np.ndarray:
    return np.linspace(cfg.f_lo, cfg.f_hi, cfg.rings + 1)


def power_spectrum_profile(img: GrayImage, mask, cfg: SpectrumConfig) -> SpectralProfile:
    """
    Кольцевой профиль энергии спектра мощности

    Дискретное преобразование Фурье изображения с удалённым средним, фон обнулён;
    |F|^2 суммируется по R кольцам равной ширины в [f_lo, f_hi] циклов/пиксель.

    Args:
        img: изображение
        mask: SegmentationMask (передний план)
        cfg: параметры колец
    """
    foreground = mask.foreground_pixels()
    unit = img.to_unit()
    if not foreground.any():
        raise ZeroEnergy("no foreground pixels")
    windowed = np.where(foreground, unit - unit[foreground].mean(), 0.0)

    power = np.abs(np.fft.fft2(windowed)) ** 2
    fy = np.fft.fftfreq(img.height)[:, None]
    fx = np.fft.fftfreq(img.width)[None, :]
    radius = np.hypot(fx, fy)

    edges = ring_edges(cfg)
    in_band = (radius >= cfg.f_lo) & (radius <= cfg.f_hi)
    ring_index = np.clip(np.searchsorted(edges, radius[in_band], side="right") - 1, 0, cfg.rings - 1)
    energies = np.bincount(ring_index, weights=power[in_band], minlength=cfg.rings)

    total = float(energies.sum())
    if total <= 0.0:
        raise ZeroEnergy("no spectral energy inside the ring band")
    p = energies / total
    nonzero = p[p > 0]
    entropy = float(-np.sum(nonzero * np.log(nonzero)))
    centers = (edges[:-1] + edges[1:]) / 2.0
    return SpectralProfile(ring_energies=p, entropy=entropy, ring_centers=centers, total_energy=total)


def _window_coordinates(grid: BlockGrid, blocks: Sequence[Tuple[int, int]], thetas: Sequence[float],
                        cfg: SinusoidConfig, shape: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Координаты выборок ориентированного окна для набора блоков, форма (N, length, width)

    Центр окна сдвигается внутрь изображения по каждой оси, где окно помещается целиком.
    """
    half_length = (cfg.window_length - 1) / 2.0
    half_width = (cfg.window_width - 1) / 2.0
    s = np.arange(cfg.window_length) - half_length
    t = np.arange(cfg.window_width) - half_width
    centers = np.array([grid.center(bx, by) for bx, by in blocks], dtype=np.float64).reshape(-1, 2)
    thetas = np.asarray(thetas, dtype=np.float64).reshape(-1)
    # d - вдоль гребня, n - поперёк гребня
    dx, dy = np.cos(thetas), np.sin(thetas)
    nx, ny = -dy, dx

    height, width = shape
    extent_x = np.abs(nx) * half_length + np.abs(dx) * half_width
    extent_y = np.abs(ny) * half_length + np.abs(dy) * half_width
    cx = np.where(2.0 * extent_x <= width - 1,
                  np.clip(centers[:, 0], extent_x, width - 1 - extent_x), centers[:, 0])
    cy = np.where(2.0 * extent_y <= height - 1,
                  np.clip(centers[:, 1], extent_y, height - 1 - extent_y), centers[:, 1])

    xs = (cx[:, None, None]
          + s[None, :, None] * nx[:, None, None]
          + t[None, None, :] * dx[:, None, None])
    ys = (cy[:, None, None]
          + s[None, :, None] * ny[:, None, None]
          + t[None, None, :] * dy[:, None, None])
    return xs, ys


def sample_windows(img: GrayImage, grid: BlockGrid, blocks: Sequence[Tuple[int, int]],
                   thetas: Sequence[float], cfg: SinusoidConfig) -> np.ndarray:
    """Билинейные выборки ориентированных окон; выборки вне изображения равны NaN"""
    if len(blocks) == 0:
        return np.zeros((0, cfg.window_length, cfg.window_width))
    xs, ys = _window_coordinates(grid, blocks, thetas, cfg, img.shape)
    gray = img.pixels.astype(np.float64)
    values = ndimage.map_coordinates(gray, [ys.ravel(), xs.ravel()], order=1, mode="nearest")
    inside = ((xs >= -_EDGE_TOLERANCE) & (xs <= img.width - 1 + _EDGE_TOLERANCE)
              & (ys >= -_EDGE_TOLERANCE) & (ys <= img.height - 1 + _EDGE_TOLERANCE))
    return np.where(inside, values.reshape(xs.shape), np.nan)


def signature_from_window(window: np.ndarray) -> XSignature:
    """
    X-сигнатура по выборкам окна

    Строки без выборок внутри изображения отбрасываются, остальные усредняются
    по выборкам внутри изображения.
    """
    window = np.asarray(window, dtype=np.float64)
    finite = np.isfinite(window)
    counts = finite.sum(axis=1)
    rows = counts > 0
    if int(rows.sum()) < 3:
        raise DegenerateBlock("oriented window lies outside the image")
    window = window[rows]
    values = np.where(finite[rows], window, 0.0).sum(axis=1) / counts[rows]
    return XSignature(window=window, values=values)


def _refine(values: np.ndarray, i: int) -> float:
    """Уточнение положения экстремума параболой по трём точкам"""
    left, mid, right = values[i - 1], values[i], values[i + 1]
    denom = left - 2.0 * mid + right
    if denom == 0.0:
        return float(i)
    return i + 0.5 * (left - right) / denom


def find_extrema(values: np.ndarray) -> Tuple[List[float], List[float], List[int], List[int]]:
    """Пики и впадины сигнатуры (первая точка плато считается экстремумом)"""
    peaks, valleys = [], []
    for i in range(1, len(values) - 1):
        if values[i] > values[i - 1] and values[i] >= values[i + 1]:
            peaks.append(i)
        elif values[i] < values[i - 1] and values[i] <= values[i + 1]:
            valleys.append(i)
    return ([_refine(values, i) for i in peaks], [_refine(values, i) for i in valleys],
            peaks, valleys)


def fit_signature(values: np.ndarray, cfg: SinusoidConfig) -> SinusoidFit:
    """
    Подбор синусоиды по x-сигнатуре

    Период - среднее расстояние между соседними пиками, амплитуда - половина разности
    средних пиков и впадин, остаток - дисперсия сигнатуры за вычетом МНК-синусоиды.
    """
    values = np.asarray(values, dtype=np.float64)
    peak_pos, _, peak_idx, valley_idx = find_extrema(values)
    if len(peak_idx) < 2 or not valley_idx:
        raise DegenerateBlock(f"x-signature has {len(peak_idx)} peaks")

    period = (peak_pos[-1] - peak_pos[0]) / (len(peak_pos) - 1)
    if period <= 0.0:
        raise DegenerateBlock("non-positive ridge period")
    amplitude = (values[peak_idx].mean() - values[valley_idx].mean()) / 2.0

    s = np.arange(len(values), dtype=np.float64)
    phase = 2.0 * math.pi * s / period
    design = np.column_stack([np.ones_like(s), np.cos(phase), np.sin(phase)])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    residual = values - design @ coef

    valid = (cfg.min_period <= period <= cfg.max_period
             and amplitude >= cfg.min_amplitude * 255.0)
    return SinusoidFit(
        amplitude=float(amplitude),
        period=float(period),
        residual_variance=float(np.var(residual)),
        valid=bool(valid),
        mean_level=float(coef[0]),
        cos_coef=float(coef[1]),
        sin_coef=float(coef[2]),
    )


def x_signature(img: GrayImage, grid: BlockGrid, bx: int, by: int, theta: float,
                cfg: SinusoidConfig) -> XSignature:
    return signature_from_window(sample_windows(img, grid, [(bx, by)], [theta], cfg)[0])


def sinusoid_fit_block(img: GrayImage, grid: BlockGrid, bx: int, by: int, theta: float,
                       cfg: SinusoidConfig) -> Tuple[SinusoidFit, XSignature]:
    """
    Синусоидальная модель гребней/впадин одного блока

    Args:
        img: изображение
        grid: сетка блоков
        bx, by: индекс блока
        theta: направление гребня блока
        cfg: размеры окна и окно надёжности
    """
    signature = x_signature(img, grid, bx, by, theta, cfg)
    return fit_signature(signature.values, cfg), signature


def orientation_csv(field: OrientationField) -> str:
    """Отладочный экспорт поля ориентаций: block_x,block_y,theta_radians"""
    lines = ["block_x,block_y,theta_radians"]
    for bx, by in field.grid:
        if field.degenerate[by, bx]:
            continue
        lines.append(f"{bx},{by},{field.theta[by, bx]:.6f}")
    return "\n".join(lines) + "\n"


def spectrum_csv(profile: SpectralProfile) -> str:
    """Отладочный экспорт кольцевого профиля: ring_index,f_center,p_i"""
    lines = ["ring_index,f_center,p_i"]
    for i, (center, p) in enumerate(zip(profile.ring_centers, profile.ring_energies)):
        lines.append(f"{i},{center:.6f},{p:.6f}")
    return "\n".join(lines) + "\n"
