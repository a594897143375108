"""
Модуль Quality Features - десять мер качества отпечатка

Меры гребней (сила, непрерывность, чёткость) вычисляются по одному сегментированному
изображению и образуют вектор признаков для классификации живой/поддельный.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from liveprint.config import Config, ToolConfig
from liveprint.errors import DegenerateBlock, EmptyForeground, NoReliableBlocks, ZeroEnergy
from liveprint.modules.image_core import GrayImage
from liveprint.modules.ridge_analysis import (
    GradientField,
    OrientationField,
    SinusoidFit,
    angle_difference,
    block_covariances,
    compute_gradients,
    eigenvalues,
    fit_signature,
    orientation_field,
    power_spectrum_profile,
    sample_windows,
    signature_from_window,
)
from liveprint.modules.segmentation import SegmentationMask, segment

logger = logging.getLogger(__name__)

FEATURE_NAMES = Config.FEATURE_NAMES


class RidgeProperty(Enum):
    """Свойство гребней, которое измеряет признак"""
    STRENGTH = "ridge strength"
    CONTINUITY = "ridge continuity"
    CLARITY = "ridge clarity"


# Признак -> (свойство, источник информации)
FEATURE_PROPERTIES: Dict[str, Tuple[RidgeProperty, str]] = {
    "Q_OCL": (RidgeProperty.STRENGTH, "local angle"),
    "Q_E": (RidgeProperty.STRENGTH, "power spectrum"),
    "Q_LOQ": (RidgeProperty.CONTINUITY, "local angle"),
    "Q_COF": (RidgeProperty.CONTINUITY, "local angle"),
    "Q_MEAN": (RidgeProperty.CLARITY, "pixel intensity"),
    "Q_STD": (RidgeProperty.CLARITY, "pixel intensity"),
    "Q_LCS1": (RidgeProperty.CLARITY, "pixel intensity"),
    "Q_LCS2": (RidgeProperty.CLARITY, "pixel intensity"),
    "Q_A": (RidgeProperty.CLARITY, "pixel intensity"),
    "Q_VAR": (RidgeProperty.CLARITY, "pixel intensity"),
}

# 8-соседство блока
_NEIGHBOURS = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]


@dataclass(frozen=True)
class FeatureVector:
    """Десять мер качества в порядке сводной таблицы, каждая в [0, 1] (больше - лучше)"""
    q_ocl: float
    q_e: float
    q_loq: float
    q_cof: float
    q_mean: float
    q_std: float
    q_lcs1: float
    q_lcs2: float
    q_a: float
    q_var: float

    def __post_init__(self):
        for name, value in zip(FEATURE_NAMES, self.as_tuple()):
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} = {value} outside [0, 1]")

    def as_tuple(self) -> Tuple[float, ...]:
        return (self.q_ocl, self.q_e, self.q_loq, self.q_cof, self.q_mean,
                self.q_std, self.q_lcs1, self.q_lcs2, self.q_a, self.q_var)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.as_tuple()))

    @classmethod
    def from_values(cls, values) -> "FeatureVector":
        values = [float(v) for v in values]
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} feature values, got {len(values)}")
        return cls(*values)


@dataclass(frozen=True)
class BlockClarity:
    """Перекрытие распределений серого гребней и впадин в блоке"""
    alpha: float
    beta: float
    overlap: float
    reliable: bool


# Блок без надёжной подгонки: наихудшее перекрытие
UNRELIABLE = BlockClarity(alpha=1.0, beta=1.0, overlap=1.0, reliable=False)


@dataclass
class FeatureExtraction:
    """Результат извлечения признаков вместе с промежуточными данными"""
    features: FeatureVector
    mask: SegmentationMask
    field: OrientationField
    warnings: List[str] = field(default_factory=list)


def _clip_unit(value: float) -> float:
    return float(min(1.0, max(0.0, value)))


class QualityAnalyzer:
    """
    Вычисление мер качества одного изображения

    Градиенты, моменты блоков и подгонки синусоиды считаются один раз и
    используются всеми мерами.
    """

    def __init__(self, img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
                 config: Optional[ToolConfig] = None,
                 gradients: Optional[GradientField] = None):
        if mask.count == 0:
            raise EmptyForeground("mask has no foreground blocks")
        self.img = img
        self.mask = mask
        self.field = orientation
        self.config = config or ToolConfig()
        self._gradients = gradients
        self._fits: Optional[Dict[Tuple[int, int], Optional[SinusoidFit]]] = None
        self._windows: Dict[Tuple[int, int], np.ndarray] = {}
        self._clarity: Optional[Dict[Tuple[int, int], BlockClarity]] = None

    @property
    def gradients(self) -> GradientField:
        if self._gradients is None:
            self._gradients = compute_gradients(self.img)
        return self._gradients

    # --- сила гребней ---

    def ocl_map(self) -> np.ndarray:
        """Поблочная уверенность ориентации 1 - lambda_min/lambda_max (NaN вне переднего плана)"""
        jxx, jxy, jyy = block_covariances(self.gradients, self.mask.grid)
        lambda_max, lambda_min = eigenvalues(jxx, jxy, jyy)
        safe = np.where(lambda_max > 0, lambda_max, 1.0)
        ocl = np.where(lambda_max > 0, 1.0 - lambda_min / safe, 0.0)
        return np.where(self.mask.foreground, ocl, np.nan)

    def q_ocl(self) -> float:
        ocl = self.ocl_map()[self.mask.foreground]
        cx, cy = self.mask.grid.centers()
        mx, my = self.mask.centroid
        d = np.hypot(cx - mx, cy - my)[self.mask.foreground]
        q = d.mean()
        # Гауссов вес по расстоянию до центроида; масштаб - среднее расстояние
        weights = np.exp(-d ** 2 / (2.0 * q ** 2)) if q > 0 else np.ones_like(d)
        return _clip_unit(np.sum(weights * ocl) / np.sum(weights))

    def q_e(self) -> float:
        profile = power_spectrum_profile(self.img, self.mask, self.config.spectrum)
        return _clip_unit(1.0 - profile.entropy / math.log(self.config.spectrum.rings))

    # --- непрерывность гребней ---

    def _usable(self) -> np.ndarray:
        return self.mask.foreground & ~self.field.degenerate

    def loq_map(self) -> np.ndarray:
        """Средняя разность направления с соседями по 8-соседству (NaN, если соседей нет)"""
        usable = self._usable()
        padded_usable = np.pad(usable, 1, constant_values=False)
        padded_theta = np.pad(self.field.theta, 1)
        ny, nx = usable.shape
        total = np.zeros(usable.shape)
        count = np.zeros(usable.shape)
        for dx, dy in _NEIGHBOURS:
            neighbour = (slice(1 + dy, 1 + dy + ny), slice(1 + dx, 1 + dx + nx))
            ok = usable & padded_usable[neighbour]
            total += np.where(ok, angle_difference(self.field.theta, padded_theta[neighbour]), 0.0)
            count += ok
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)

    def q_loq(self) -> float:
        deltas = self.loq_map()
        deltas = deltas[~np.isnan(deltas)]
        if deltas.size == 0:
            return 1.0
        return _clip_unit(np.mean(1.0 - deltas / (math.pi / 2.0)))

    def q_cof(self) -> float:
        usable = self._usable()
        theta = self.field.theta
        pairs = 0
        abrupt = 0
        # Пары соседних блоков вдоль строк и вдоль столбцов
        for a, b, ok in (
            (theta[:, :-1], theta[:, 1:], usable[:, :-1] & usable[:, 1:]),
            (theta[:-1, :], theta[1:, :], usable[:-1, :] & usable[1:, :]),
        ):
            pairs += int(ok.sum())
            abrupt += int((ok & (angle_difference(a, b) > self.config.thresholds.cof)).sum())
        if pairs == 0:
            return 1.0
        return _clip_unit(1.0 - abrupt / pairs)

    # --- чёткость гребней ---

    def _foreground_gray(self) -> np.ndarray:
        return self.img.to_unit()[self.mask.foreground_pixels()]

    def q_mean(self) -> float:
        return _clip_unit(self._foreground_gray().mean())

    def q_std(self) -> float:
        # sigma на [0, 1] не превышает 0.5
        return _clip_unit(2.0 * self._foreground_gray().std())

    def block_fits(self) -> Dict[Tuple[int, int], Optional[SinusoidFit]]:
        """Подгонка синусоиды для каждого блока переднего плана (None - вырожденный блок)"""
        if self._fits is not None:
            return self._fits
        blocks = self.mask.blocks()
        thetas = [self.field.theta[by, bx] for bx, by in blocks]
        windows = sample_windows(self.img, self.mask.grid, blocks, thetas, self.config.sinusoid)
        fits: Dict[Tuple[int, int], Optional[SinusoidFit]] = {}
        for block, window in zip(blocks, windows):
            self._windows[block] = window
            try:
                signature = signature_from_window(window)
                fits[block] = fit_signature(signature.values, self.config.sinusoid)
            except DegenerateBlock:
                fits[block] = None
        self._fits = fits
        return fits

    def block_clarity(self) -> Dict[Tuple[int, int], BlockClarity]:
        """Перекрытие гребней и впадин для каждого блока переднего плана"""
        if self._clarity is not None:
            return self._clarity
        fits = self.block_fits()
        clarity = {block: UNRELIABLE for block, fit in fits.items() if fit is None}
        fitted = [block for block, fit in fits.items() if fit is not None]
        if fitted:
            windows = np.stack([self._windows[block] for block in fitted])
            results = clarity_from_windows(windows, [fits[block] for block in fitted])
            clarity.update(zip(fitted, results))
        self._clarity = {block: clarity[block] for block in fits}
        return self._clarity

    def q_lcs1(self) -> float:
        overlaps = [c.overlap for c in self.block_clarity().values() if c.reliable]
        if not overlaps:
            raise NoReliableBlocks("no block has a reliable sinusoid fit")
        return _clip_unit(1.0 - np.mean(overlaps))

    def q_lcs2(self) -> float:
        # Ненадёжные блоки получают наихудшее перекрытие
        overlaps = [c.overlap if c.reliable else 1.0 for c in self.block_clarity().values()]
        return _clip_unit(1.0 - np.mean(overlaps))

    def q_a(self) -> float:
        min_amplitude = self.config.thresholds.amplitude * 255.0
        fits = self.block_fits()
        good = sum(1 for fit in fits.values()
                   if fit is not None and fit.valid and fit.amplitude >= min_amplitude)
        return good / len(fits)

    def q_var(self) -> float:
        t_v = self.config.thresholds.variance
        gray = self.img.pixels.astype(np.float64)
        fits = self.block_fits()
        good = 0
        for (bx, by), fit in fits.items():
            if fit is None or not fit.valid:
                continue
            x0, y0, x1, y1 = self.mask.grid.rect(bx, by)
            if fit.residual_variance <= t_v * gray[y0:y1, x0:x1].var():
                good += 1
        return good / len(fits)

    def extract(self) -> FeatureExtraction:
        """
        Все десять мер

        При отсутствии надёжных блоков Q_LCS1 берётся равным Q_LCS2, при нулевой
        энергии спектра в полосе колец Q_E = 0; оба случая попадают в warnings.
        """
        warnings: List[str] = []
        try:
            q_e = self.q_e()
        except ZeroEnergy:
            logger.warning("no in-band spectral energy in the foreground, Q_E = 0")
            warnings.append("ZeroEnergy")
            q_e = 0.0
        q_lcs2 = self.q_lcs2()
        try:
            q_lcs1 = self.q_lcs1()
        except NoReliableBlocks:
            logger.warning("no reliable sinusoid blocks, Q_LCS1 falls back to Q_LCS2")
            warnings.append("NoReliableBlocks")
            q_lcs1 = q_lcs2
        features = FeatureVector(
            q_ocl=self.q_ocl(),
            q_e=q_e,
            q_loq=self.q_loq(),
            q_cof=self.q_cof(),
            q_mean=self.q_mean(),
            q_std=self.q_std(),
            q_lcs1=q_lcs1,
            q_lcs2=q_lcs2,
            q_a=self.q_a(),
            q_var=self.q_var(),
        )
        return FeatureExtraction(features=features, mask=self.mask, field=self.field, warnings=warnings)


def clarity_from_windows(windows: np.ndarray, fits: Sequence[SinusoidFit]) -> List[BlockClarity]:
    """
    Перекрытие по выборкам окон, windows формы (N, length, width)

    Пиксель - гребень, если подобранная синусоида в его позиции поперёк гребней ниже
    среднего уровня (гребни тёмные). Ошибка гребня - светлее среднего уровня, ошибка впадины - темнее.
    Выборки вне изображения (NaN) не учитываются, позиции строк отсчитываются только
    по строкам с выборками, как в x-сигнатуре.
    """
    windows = np.asarray(windows, dtype=np.float64)
    inside = np.isfinite(windows)
    s = np.cumsum(inside.any(axis=2), axis=1) - 1.0
    period = np.array([fit.period for fit in fits])[:, None]
    cos_coef = np.array([fit.cos_coef for fit in fits])[:, None]
    sin_coef = np.array([fit.sin_coef for fit in fits])[:, None]
    level = np.array([fit.mean_level for fit in fits])[:, None, None]

    phase = 2.0 * math.pi * s / period
    wave = cos_coef * np.cos(phase) + sin_coef * np.sin(phase)
    ridge = (wave < 0)[:, :, None] & inside
    valley = (wave > 0)[:, :, None] & inside
    values = np.where(inside, windows, level)
    n_ridge = ridge.sum(axis=(1, 2))
    n_valley = valley.sum(axis=(1, 2))
    ridge_errors = (ridge & (values > level)).sum(axis=(1, 2))
    valley_errors = (valley & (values < level)).sum(axis=(1, 2))

    results = []
    for i, fit in enumerate(fits):
        if n_ridge[i] == 0 or n_valley[i] == 0:
            results.append(UNRELIABLE)
            continue
        alpha = float(ridge_errors[i] / n_ridge[i])
        beta = float(valley_errors[i] / n_valley[i])
        results.append(BlockClarity(alpha=alpha, beta=beta, overlap=(alpha + beta) / 2.0,
                                    reliable=fit.valid))
    return results


def clarity_from_window(window: np.ndarray, fit: SinusoidFit) -> BlockClarity:
    """Перекрытие гребней и впадин одного блока"""
    return clarity_from_windows(np.asarray(window)[None], [fit])[0]

def _analyzer(img, mask, orientation, config) -> QualityAnalyzer:
    return QualityAnalyzer(img, mask, orientation, config)


def q_ocl(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
          config: Optional[ToolConfig] = None) -> float:
    """Уверенность ориентации с весом по расстоянию до центроида"""
    return _analyzer(img, mask, orientation, config).q_ocl()


def q_e(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
        config: Optional[ToolConfig] = None) -> float:
    """Концентрация энергии спектра: 1 - H / log R"""
    return _analyzer(img, mask, orientation, config).q_e()


def q_loq(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
          config: Optional[ToolConfig] = None) -> float:
    """Локальное качество ориентации"""
    return _analyzer(img, mask, orientation, config).q_loq()


def q_cof(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
          config: Optional[ToolConfig] = None) -> float:
    """Непрерывность поля ориентаций"""
    return _analyzer(img, mask, orientation, config).q_cof()


def q_mean(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
           config: Optional[ToolConfig] = None) -> float:
    return _analyzer(img, mask, orientation, config).q_mean()


def q_std(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
          config: Optional[ToolConfig] = None) -> float:
    return _analyzer(img, mask, orientation, config).q_std()


def q_lcs1(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
           config: Optional[ToolConfig] = None) -> float:
    """Локальная чёткость по надёжным блокам (оптимистичная)"""
    return _analyzer(img, mask, orientation, config).q_lcs1()


def q_lcs2(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
           config: Optional[ToolConfig] = None) -> float:
    """Локальная чёткость, ненадёжные блоки получают худшее значение"""
    return _analyzer(img, mask, orientation, config).q_lcs2()


def q_a(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
        config: Optional[ToolConfig] = None) -> float:
    return _analyzer(img, mask, orientation, config).q_a()


def q_var(img: GrayImage, mask: SegmentationMask, orientation: OrientationField,
          config: Optional[ToolConfig] = None) -> float:
    return _analyzer(img, mask, orientation, config).q_var()


def extract_with_diagnostics(img: GrayImage, config: Optional[ToolConfig] = None) -> FeatureExtraction:
    """
    Сегментация, поле ориентаций и десять мер качества одного изображения

    Args:
        img: изображение
        config: конфигурация (по умолчанию - значения по умолчанию)
    """
    config = config or ToolConfig()
    mask = segment(img, config.gabor, config.block_size)
    gradients = compute_gradients(img)
    orientation = orientation_field(img, mask.grid, gradients)
    analyzer = QualityAnalyzer(img, mask, orientation, config, gradients=gradients)
    return analyzer.extract()


def extract_all(img: GrayImage, config: Optional[ToolConfig] = None) -> FeatureVector:
    """Вектор признаков одного изображения"""
    return extract_with_diagnostics(img, config).features
