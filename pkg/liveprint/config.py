"""
Конфигурация liveprint
"""
import math
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from liveprint.errors import ConfigError

# Пытаемся загрузить переменные окружения из .env файла
try:
    from dotenv import load_dotenv
    # Ищем .env файл в корне проекта (на уровень выше от liveprint)
    env_path = Path(__file__).parent.parent / '.env'
    if env_path.exists():
        load_dotenv(dotenv_path=env_path)
    else:
        load_dotenv()
except ImportError:
    # Без python-dotenv переменные окружения задаются вручную
    pass


class Config:
    """Константы и переменные окружения"""

    # Путь к файлу конфигурации, если не передан явно
    CONFIG_ENV_VAR = "LIVEPRINT_CONFIG"

    DEFAULT_BLOCK_SIZE = 16
    MIN_BLOCK_SIZE = 4

    # Порядок признаков как в сводной таблице мер качества
    FEATURE_NAMES = (
        "Q_OCL", "Q_E", "Q_LOQ", "Q_COF", "Q_MEAN",
        "Q_STD", "Q_LCS1", "Q_LCS2", "Q_A", "Q_VAR",
    )

    # Формат вывода
    FEATURE_DECIMALS = 6
    LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

    @staticmethod
    def get_config_path() -> Optional[str]:
        """Динамически читает путь к конфигу из окружения (всегда актуальное значение)"""
        value = os.getenv(Config.CONFIG_ENV_VAR, "").strip()
        return value or None


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GaborBankConfig(_Section):
    """
    Банк фильтров Габора для сегментации

    Масштаб i: частота frequency * scale_ratio^i, огибающая sigma / scale_ratio^i.
    Порог откалиброван на двухмасштабном банке по умолчанию: шум sigma = 2 уровня серого
    ниже порога, синусоида амплитуды 8 с периодом 4..20 пикселей выше.
    """
    n_orientations: int = Field(8, ge=2)
    frequency: float = Field(0.1, gt=0.0, lt=0.5)
    sigma: float = Field(4.0, gt=0.0)
    n_scales: int = Field(2, ge=1)
    scale_ratio: float = Field(2.0, gt=1.0)
    threshold: float = Field(0.003, ge=0.0)

    @model_validator(mode="after")
    def _check_scales(self):
        if self.frequency * self.scale_ratio ** (self.n_scales - 1) >= 0.5:
            raise ValueError("highest gabor scale frequency must be below 0.5 cycles/pixel")
        return self


class SpectrumConfig(_Section):
    """Кольцевые полосы спектра мощности"""
    rings: int = Field(15, ge=2)
    f_lo: float = Field(0.06, gt=0.0)
    f_hi: float = Field(0.45, le=0.5)

    @model_validator(mode="after")
    def _check_band(self):
        if not self.f_lo < self.f_hi:
            raise ValueError("spectrum.f_lo must be below spectrum.f_hi")
        return self


class ThresholdConfig(_Section):
    """Пороги мер качества"""
    cof: float = Field(math.pi / 8, gt=0.0, le=math.pi / 2)
    amplitude: float = Field(8 / 255, ge=0.0, le=1.0)
    variance: float = Field(0.5, gt=0.0)


class SinusoidConfig(_Section):
    """Окно x-сигнатуры и окно надёжности синусоиды"""
    window_length: int = Field(32, ge=4)
    window_width: int = Field(16, ge=1)
    min_period: float = Field(3.0, gt=0.0)
    max_period: float = Field(25.0, gt=0.0)
    min_amplitude: float = Field(4 / 255, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_periods(self):
        if not self.min_period < self.max_period:
            raise ValueError("sinusoid.min_period must be below sinusoid.max_period")
        return self


class ReportConfig(_Section):
    precision: int = Field(2, ge=0, le=6)


class RuntimeConfig(_Section):
    workers: int = Field(1, ge=1)


class ToolConfig(_Section):
    """Полная конфигурация; каждая недоопределённая константа имеет ровно один ключ"""
    block_size: int = Field(Config.DEFAULT_BLOCK_SIZE, ge=Config.MIN_BLOCK_SIZE)
    gabor: GaborBankConfig = GaborBankConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    thresholds: ThresholdConfig = ThresholdConfig()
    sinusoid: SinusoidConfig = SinusoidConfig()
    report: ReportConfig = ReportConfig()
    runtime: RuntimeConfig = RuntimeConfig()

    @classmethod
    def from_flat(cls, values: Mapping[str, Any]) -> "ToolConfig":
        """
        Построение конфигурации из плоского словаря с точечными ключами

        Args:
            values: например {"spectrum.rings": 15, "block_size": 16}
        """
        nested: Dict[str, Any] = {}
        for key, value in values.items():
            if not isinstance(key, str) or not key:
                raise ConfigError(f"bad config key: {key!r}")
            if isinstance(value, (dict, list)):
                raise ConfigError(f"config key {key!r} must hold a scalar")
            parts = key.split(".")
            if len(parts) == 1:
                nested[key] = value
            elif len(parts) == 2:
                section = nested.setdefault(parts[0], {})
                if not isinstance(section, dict):
                    raise ConfigError(f"config key {parts[0]!r} is both a value and a section")
                section[parts[1]] = value
            else:
                raise ConfigError(f"config key {key!r} is nested too deeply")
        try:
            return cls.model_validate(nested)
        except ValidationError as e:
            raise ConfigError(str(e)) from e

    def to_flat(self) -> Dict[str, Any]:
        """Плоское представление с точечными ключами"""
        flat: Dict[str, Any] = {}
        for key, value in self.model_dump().items():
            if isinstance(value, dict):
                for sub_key, sub_value in value.items():
                    flat[f"{key}.{sub_key}"] = sub_value
            else:
                flat[key] = value
        return flat


def load_config(path: Optional[str] = None) -> ToolConfig:
    """
    Загрузка конфигурации

    Порядок поиска: явный путь, затем переменная LIVEPRINT_CONFIG, затем значения по умолчанию.

    Args:
        path: путь к YAML-файлу с плоскими точечными ключами
    """
    path = path or Config.get_config_path()
    if path is None:
        return ToolConfig()

    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e

    try:
        values = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e

    if values is None:
        return ToolConfig()
    if not isinstance(values, dict):
        raise ConfigError(f"config {path} must be a flat mapping")
    return ToolConfig.from_flat(values)
