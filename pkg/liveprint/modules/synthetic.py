"""
Модуль Synthetic - генератор синтетических отпечатков для тестов и демонстраций

Гребни тёмные: I = 128 - A*sin(2*pi*u/P), u - координата поперёк гребней.
Все изображения детерминированы семенем.
"""
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from scipy import ndimage

from liveprint.errors import BadSpec
from liveprint.modules.classification import Label
from liveprint.modules.image_core import BlockGrid, GrayImage, write_pgm
from liveprint.modules.manifest import ManifestRecord, format_manifest
from liveprint.modules.segmentation import SegmentationMask

BACKGROUND_LEVEL = 200
DISC_FRACTION = 0.6


class SynthKind(Enum):
    PARALLEL = "parallel"
    WHORL = "whorl"
    NOISE = "noise"
    MIXED = "mixed"
    DISC_ON_FLAT = "disc-on-flat"


@dataclass(frozen=True)
class SynthSpec:
    """
    Параметры синтетического изображения

    angle - направление гребней в градусах (0 - горизонтальные гребни),
    noise_sigma - аддитивный гауссов шум, blur_sigma - размытие до шума,
    cell - сторона клетки шахматного узора для mixed.
    """
    kind: SynthKind = SynthKind.PARALLEL
    width: int = 256
    height: int = 256
    angle: float = 0.0
    period: float = 10.0
    amplitude: float = 100.0
    noise_sigma: float = 0.0
    seed: int = 0
    blur_sigma: float = 0.0
    cell: int = 16

    def __post_init__(self):
        if not isinstance(self.kind, SynthKind):
            try:
                object.__setattr__(self, "kind", SynthKind(self.kind))
            except ValueError:
                raise BadSpec(f"unknown pattern kind: {self.kind!r}") from None
        if self.width < 1 or self.height < 1:
            raise BadSpec(f"image size must be positive, got {self.width}x{self.height}")
        for name in ("angle", "period", "amplitude", "noise_sigma", "blur_sigma"):
            if not math.isfinite(getattr(self, name)):
                raise BadSpec(f"{name} must be finite")
        if self.period <= 0:
            raise BadSpec(f"period must be positive, got {self.period}")
        if self.amplitude < 0 or self.noise_sigma < 0 or self.blur_sigma < 0:
            raise BadSpec("amplitude, noise and blur must be non-negative")
        if self.cell < 1:
            raise BadSpec(f"cell must be positive, got {self.cell}")
        if not 0 <= self.seed < 2 ** 64:
            raise BadSpec(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def center(self) -> Tuple[float, float]:
        return (self.width - 1) / 2.0, (self.height - 1) / 2.0

    @property
    def disc_radius(self) -> float:
        return DISC_FRACTION * min(self.width, self.height) / 2.0


def _coordinates(spec: SynthSpec) -> Tuple[np.ndarray, np.ndarray]:
    cx, cy = spec.center
    y, x = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    return x - cx, y - cy


def _parallel(spec: SynthSpec) -> np.ndarray:
    x, y = _coordinates(spec)
    alpha = math.radians(spec.angle)
    u = -x * math.sin(alpha) + y * math.cos(alpha)
    return 128.0 - spec.amplitude * np.sin(2.0 * math.pi * u / spec.period)


def _whorl(spec: SynthSpec) -> np.ndarray:
    x, y = _coordinates(spec)
    r = np.hypot(x, y)
    return 128.0 - spec.amplitude * np.sin(2.0 * math.pi * r / spec.period)


def _noise_texture(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    # Дисперсия совпадает с дисперсией синусоиды той же амплитуды
    sigma = spec.amplitude / math.sqrt(2.0)
    return 128.0 + rng.normal(0.0, sigma, size=(spec.height, spec.width))


def _disc(spec: SynthSpec) -> np.ndarray:
    x, y = _coordinates(spec)
    return np.hypot(x, y) <= spec.disc_radius


def gen_synthetic_fingerprint(spec: SynthSpec) -> GrayImage:
    """
    Синтетическое изображение по спецификации

    Args:
        spec: вид узора, размеры, угол, период, амплитуда, шум, размытие, семя
    """
    rng = np.random.default_rng(spec.seed)
    kind = spec.kind
    if kind is SynthKind.PARALLEL:
        image = _parallel(spec)
    elif kind is SynthKind.WHORL:
        image = _whorl(spec)
    elif kind is SynthKind.NOISE:
        image = _noise_texture(spec, rng)
    elif kind is SynthKind.MIXED:
        y, x = np.mgrid[0:spec.height, 0:spec.width]
        ridges = ((x // spec.cell + y // spec.cell) % 2) == 0
        image = np.where(ridges, _parallel(spec), _noise_texture(spec, rng))
    else:
        image = np.where(_disc(spec), _parallel(spec), float(BACKGROUND_LEVEL))

    if spec.blur_sigma > 0:
        image = ndimage.gaussian_filter(image, spec.blur_sigma, mode="nearest")
    if spec.noise_sigma > 0:
        image = image + rng.normal(0.0, spec.noise_sigma, size=image.shape)
    return GrayImage.from_array(np.clip(np.rint(image), 0, 255).astype(np.uint8))


def disc_ground_truth(spec: SynthSpec, grid: BlockGrid) -> SegmentationMask:
    """Эталонная маска для disc-on-flat: блоки, пересекающие диск"""
    cx, cy = spec.center
    radius = spec.disc_radius
    foreground = np.zeros((grid.ny, grid.nx), dtype=bool)
    for bx, by in grid:
        x0, y0, x1, y1 = grid.rect(bx, by)
        dx = max(x0 - cx, 0.0, cx - (x1 - 1))
        dy = max(y0 - cy, 0.0, cy - (y1 - 1))
        foreground[by, bx] = math.hypot(dx, dy) <= radius
    return SegmentationMask(grid=grid, foreground=foreground)


@dataclass(frozen=True)
class CorpusItem:
    sample_id: str
    label: Label
    spec: SynthSpec


def synthetic_corpus(n_per_class: int, seed: int = 0,
                     size: Tuple[int, int] = (128, 128)) -> List[CorpusItem]:
    """
    Синтетический корпус живых/поддельных отпечатков

    Живые - чистые узоры, поддельные - те же узоры после размытия и сильного шума.

    Args:
        n_per_class: образцов в каждом классе
        seed: семя корпуса
        size: (ширина, высота)
    """
    if n_per_class < 1:
        raise BadSpec(f"n_per_class must be positive, got {n_per_class}")
    rng = np.random.default_rng(seed)
    width, height = size
    items: List[CorpusItem] = []
    for label in (Label.REAL, Label.FAKE):
        for i in range(n_per_class):
            kind = SynthKind.PARALLEL if rng.random() < 0.5 else SynthKind.WHORL
            params = dict(
                kind=kind,
                width=width,
                height=height,
                angle=float(rng.uniform(0.0, 180.0)),
                period=float(rng.uniform(8.0, 12.0)),
                amplitude=float(rng.uniform(70.0, 110.0)),
                seed=int(rng.integers(0, 2 ** 63)),
            )
            if label is Label.REAL:
                spec = SynthSpec(noise_sigma=float(rng.uniform(0.0, 5.0)), **params)
            else:
                spec = SynthSpec(noise_sigma=float(rng.uniform(20.0, 30.0)),
                                 blur_sigma=float(rng.uniform(1.5, 2.5)), **params)
            items.append(CorpusItem(sample_id=f"{label.value}_{i:04d}.pgm", label=label, spec=spec))
    return items


def write_corpus(items: List[CorpusItem], out_dir: Union[str, Path],
                 sensor: str = "synthetic") -> Path:
    """Запись PGM-файлов корпуса и manifest.csv; возвращает путь к манифесту"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for item in items:
        write_pgm(out_dir / item.sample_id, gen_synthetic_fingerprint(item.spec))
        records.append(ManifestRecord(path=item.sample_id, label=item.label, sensor=sensor))
    manifest = out_dir / "manifest.csv"
    manifest.write_text(format_manifest(records), encoding="utf-8")
    return manifest
