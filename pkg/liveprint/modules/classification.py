"""
Модуль Classification - линейный дискриминантный анализ и оценка leave-one-out

Два класса (живой/поддельный) моделируются нормальными распределениями с общей
ковариацией. Оценка: каждый образец классифицируется моделью, обученной на всех
остальных образцах того же сенсора.
"""
import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from liveprint.config import Config
from liveprint.errors import BadFeatureName, DegenerateTraining, MixedSensors, ZeroVariance

logger = logging.getLogger(__name__)

# Добавка к диагонали: RIDGE_SCALE * trace / d
RIDGE_SCALE = 1e-6
# Матрица вырождена, если s_min <= s_max * SINGULAR_RTOL
SINGULAR_RTOL = 1e-12
ZERO_TRACE = 1e-20
TIE_TOLERANCE = 1e-12


class Label(Enum):
    REAL = "real"
    FAKE = "fake"

    @classmethod
    def parse(cls, value: str) -> "Label":
        return cls(value.strip().lower())


@dataclass(frozen=True)
class LabeledSample:
    """Образец: идентификатор, сенсор, метка и вектор признаков; material не используется"""
    id: str
    sensor: str
    label: Label
    features: Tuple[float, ...]
    material: Optional[str] = None

    def __post_init__(self):
        values = self.features
        if hasattr(values, "as_tuple"):
            values = values.as_tuple()
        object.__setattr__(self, "features", tuple(float(v) for v in values))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.features, dtype=np.float64)


@dataclass(frozen=True)
class SubsetMask:
    """Подмножество признаков: флаги в порядке сводной таблицы, выбран хотя бы один"""
    bits: Tuple[bool, ...]

    def __post_init__(self):
        bits = tuple(bool(b) for b in self.bits)
        if not bits:
            raise ValueError("subset mask needs at least one position")
        if not any(bits):
            raise ValueError("subset mask must select at least one feature")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_indices(cls, indices: Sequence[int], n: int = len(Config.FEATURE_NAMES)) -> "SubsetMask":
        selected = set(indices)
        if any(i < 0 or i >= n for i in selected):
            raise ValueError(f"feature index outside 0..{n - 1}")
        return cls(tuple(i in selected for i in range(n)))

    @classmethod
    def full(cls, n: int = len(Config.FEATURE_NAMES)) -> "SubsetMask":
        return cls((True,) * n)

    @classmethod
    def from_bitstring(cls, text: str) -> "SubsetMask":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"bad subset bit string: {text!r}")
        return cls(tuple(ch == "1" for ch in text))

    @classmethod
    def from_names(cls, text: str, feature_names: Sequence[str] = Config.FEATURE_NAMES) -> "SubsetMask":
        """
        Разбор списка имён признаков через запятую

        Args:
            text: например "Q_E,Q_STD"
            feature_names: порядок признаков
        """
        lookup = {name.upper(): i for i, name in enumerate(feature_names)}
        indices = []
        for raw in text.split(","):
            name = raw.strip().upper()
            if name not in lookup:
                raise BadFeatureName(f"unknown feature name: {raw.strip()!r}")
            indices.append(lookup[name])
        return cls.from_indices(indices, len(feature_names))

    @property
    def indices(self) -> Tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.bits) if b)

    @property
    def cardinality(self) -> int:
        return len(self.indices)

    @property
    def n_features(self) -> int:
        return len(self.bits)

    @property
    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def names(self, feature_names: Sequence[str] = Config.FEATURE_NAMES) -> List[str]:
        return [feature_names[i] for i in self.indices]

    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        """Меньшая мощность, затем более ранние признаки"""
        return self.cardinality, self.indices


def all_subsets(n: int) -> Iterator[SubsetMask]:
    """Все 2^n - 1 непустых подмножеств: по возрастанию мощности, затем лексикографически"""
    for k in range(1, n + 1):
        for combo in itertools.combinations(range(n), k):
            yield SubsetMask.from_indices(combo, n)


@dataclass(frozen=True)
class GaussianClassModel:
    """Средние классов, общая ковариация и априорные вероятности"""
    mu_real: np.ndarray
    mu_fake: np.ndarray
    sigma_pooled: np.ndarray
    prior_real: float
    prior_fake: float

    @property
    def dimension(self) -> int:
        return len(self.mu_real)


@dataclass(frozen=True)
class Prediction:
    label: Label
    posterior_real: float

    @property
    def posterior_fake(self) -> float:
        return 1.0 - self.posterior_real


@dataclass(frozen=True)
class EvaluationResult:
    """Счётчики ошибок leave-one-out и производные проценты"""
    false_accepts: int
    false_rejects: int
    n_real: int
    n_fake: int

    @property
    def far(self) -> float:
        """Процент поддельных образцов, принятых как живые"""
        return 100.0 * self.false_accepts / self.n_fake

    @property
    def frr(self) -> float:
        """Процент живых образцов, отвергнутых как поддельные"""
        return 100.0 * self.false_rejects / self.n_real

    @property
    def ace(self) -> float:
        return compute_ace(self.far, self.frr)

    @property
    def correct_rate(self) -> float:
        return 100.0 - self.ace

    @property
    def ace_key(self) -> int:
        """Целочисленный ключ, упорядочивающий ACE на одном наборе данных"""
        return self.false_accepts * self.n_real + self.false_rejects * self.n_fake


def compute_ace(far: float, frr: float) -> float:
    """ACE = (FAR + FRR) / 2, проценты"""
    for value in (far, frr):
        if not 0.0 <= value <= 100.0:
            raise ValueError(f"error rate {value} outside [0, 100]")
    return (far + frr) / 2.0


def samples_to_arrays(samples: Sequence[LabeledSample]) -> Tuple[np.ndarray, np.ndarray]:
    """Матрица признаков (n, D) и флаги is_real (n,)"""
    if not samples:
        raise DegenerateTraining("no samples")
    X = np.array([s.features for s in samples], dtype=np.float64)
    is_real = np.array([s.label is Label.REAL for s in samples], dtype=bool)
    return X, is_real


def check_single_sensor(samples: Sequence[LabeledSample]) -> str:
    sensors = {s.sensor for s in samples}
    if len(sensors) > 1:
        raise MixedSensors(f"samples come from several sensors: {sorted(sensors)}")
    return sensors.pop() if sensors else ""


def regularize(sigma: np.ndarray) -> np.ndarray:
    """
    Гребневая регуляризация ковариации (одной матрицы или стека (..., d, d))

    Вырожденные с рабочей точностью матрицы получают добавку eps*I,
    eps = 1e-6 * trace / d. Нулевой след означает постоянные признаки.
    """
    sigma = np.array(sigma, dtype=np.float64)
    if not np.all(np.isfinite(sigma)):
        raise ZeroVariance("covariance has non-finite entries")
    d = sigma.shape[-1]
    trace = np.trace(sigma, axis1=-2, axis2=-1)
    if np.any(trace <= ZERO_TRACE):
        raise ZeroVariance("selected features have zero within-class variance")
    s = np.linalg.svd(sigma, compute_uv=False)
    singular = s[..., -1] <= s[..., 0] * SINGULAR_RTOL
    if np.any(singular):
        eps = np.where(singular, RIDGE_SCALE * trace / d, 0.0)
        sigma = sigma + eps[..., None, None] * np.eye(d)
    return sigma


def fit_lda_arrays(X: np.ndarray, is_real: np.ndarray) -> GaussianClassModel:
    """Прямая оценка параметров LDA по матрице признаков"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    is_real = np.asarray(is_real, dtype=bool)
    real, fake = X[is_real], X[~is_real]
    n_real, n_fake = len(real), len(fake)
    if n_real < 2 or n_fake < 2:
        raise DegenerateTraining(f"need >= 2 samples per class, got {n_real} real and {n_fake} fake")

    s_real = np.atleast_2d(np.cov(real, rowvar=False, ddof=1))
    s_fake = np.atleast_2d(np.cov(fake, rowvar=False, ddof=1))
    pooled = ((n_real - 1) * s_real + (n_fake - 1) * s_fake) / (n_real + n_fake - 2)
    n = n_real + n_fake
    return GaussianClassModel(
        mu_real=real.mean(axis=0),
        mu_fake=fake.mean(axis=0),
        sigma_pooled=regularize(pooled),
        prior_real=n_real / n,
        prior_fake=n_fake / n,
    )


def fit_lda(samples: Sequence[LabeledSample], subset: SubsetMask) -> GaussianClassModel:
    """
    Обучение LDA на выбранных признаках

    Args:
        samples: обучающие образцы
        subset: выбранные признаки
    """
    X, is_real = samples_to_arrays(samples)
    return fit_lda_arrays(X[:, list(subset.indices)], is_real)


def _discriminant(diff_real: np.ndarray, diff_fake: np.ndarray, solved_real: np.ndarray,
                  solved_fake: np.ndarray, log_prior_ratio) -> np.ndarray:
    q_real = np.sum(diff_real * solved_real, axis=-1)
    q_fake = np.sum(diff_fake * solved_fake, axis=-1)
    return -0.5 * q_real + 0.5 * q_fake + log_prior_ratio


def _decide(posterior_real: np.ndarray) -> np.ndarray:
    """True - живой; точная ничья уходит в поддельный"""
    return (posterior_real > 0.5) & (np.abs(posterior_real - 0.5) > TIE_TOLERANCE)


def posterior_real(model: GaussianClassModel, features) -> float:
    x = np.atleast_1d(np.asarray(features, dtype=np.float64))
    diff_real = x - model.mu_real
    diff_fake = x - model.mu_fake
    solved_real = np.linalg.solve(model.sigma_pooled, diff_real)
    solved_fake = np.linalg.solve(model.sigma_pooled, diff_fake)
    score = _discriminant(diff_real, diff_fake, solved_real, solved_fake,
                          np.log(model.prior_real) - np.log(model.prior_fake))
    return float(expit(score))


def predict(model: GaussianClassModel, features, subset: Optional[SubsetMask] = None) -> Prediction:
    """
    Классификация одного вектора признаков

    Args:
        model: обученная модель
        features: полный вектор признаков (если задан subset) или уже выбранные признаки
        subset: подмножество, на котором обучена модель
    """
    x = np.atleast_1d(np.asarray(
        features.as_tuple() if hasattr(features, "as_tuple") else features, dtype=np.float64))
    if subset is not None and len(x) == subset.n_features:
        x = x[list(subset.indices)]
    if len(x) != model.dimension:
        raise ValueError(f"expected {model.dimension} features, got {len(x)}")
    post = posterior_real(model, x)
    label = Label.REAL if _decide(np.array(post)) else Label.FAKE
    return Prediction(label=label, posterior_real=post)


@dataclass(frozen=True)
class ScatterStatistics:
    """
    Достаточные статистики набора данных по всем признакам

    Средние и матрицы рассеяния классов позволяют получить модель без любого одного
    образца понижающим обновлением ранга 1 вместо переобучения.
    """
    X: np.ndarray
    is_real: np.ndarray
    n_real: int
    n_fake: int
    mean_real: np.ndarray
    mean_fake: np.ndarray
    scatter_real: np.ndarray
    scatter_fake: np.ndarray

    @classmethod
    def from_arrays(cls, X: np.ndarray, is_real: np.ndarray) -> "ScatterStatistics":
        X = np.asarray(X, dtype=np.float64)
        is_real = np.asarray(is_real, dtype=bool)
        real, fake = X[is_real], X[~is_real]
        if len(real) < 3 or len(fake) < 3:
            raise DegenerateTraining(
                f"leave-one-out needs >= 3 samples per class, got {len(real)} real and {len(fake)} fake"
            )
        mean_real, mean_fake = real.mean(axis=0), fake.mean(axis=0)
        centered_real, centered_fake = real - mean_real, fake - mean_fake
        return cls(
            X=X,
            is_real=is_real,
            n_real=len(real),
            n_fake=len(fake),
            mean_real=mean_real,
            mean_fake=mean_fake,
            scatter_real=centered_real.T @ centered_real,
            scatter_fake=centered_fake.T @ centered_fake,
        )

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "ScatterStatistics":
        check_single_sensor(samples)
        return cls.from_arrays(*samples_to_arrays(samples))

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def loo_decisions(stats: ScatterStatistics, subset: SubsetMask) -> np.ndarray:
    """
    Решения leave-one-out для всех образцов (True - живой) через понижающее обновление

    Для образца x класса c: delta = x - mu_c, mu_c' = mu_c - delta/(n_c - 1),
    M_c' = M_c - n_c/(n_c - 1) * delta delta^T, Sigma' = (M_real' + M_fake') / (n - 3).
    """
    idx = np.array(subset.indices)
    X = stats.X[:, idx]
    is_real = stats.is_real
    mu_real = stats.mean_real[idx]
    mu_fake = stats.mean_fake[idx]
    scatter = (stats.scatter_real + stats.scatter_fake)[np.ix_(idx, idx)]
    n = stats.n_real + stats.n_fake

    n_own = np.where(is_real, stats.n_real, stats.n_fake).astype(np.float64)
    delta = X - np.where(is_real[:, None], mu_real, mu_fake)
    shift = delta / (n_own - 1.0)[:, None]
    loo_mu_real = np.where(is_real[:, None], mu_real - shift, mu_real)
    loo_mu_fake = np.where(is_real[:, None], mu_fake, mu_fake - shift)

    weight = n_own / (n_own - 1.0)
    sigma = (scatter - weight[:, None, None] * delta[:, :, None] * delta[:, None, :]) / (n - 3)
    sigma = regularize(sigma)

    n_real_train = np.where(is_real, stats.n_real - 1, stats.n_real)
    n_fake_train = np.where(is_real, stats.n_fake, stats.n_fake - 1)
    log_prior_ratio = np.log(n_real_train) - np.log(n_fake_train)

    diff_real = X - loo_mu_real
    diff_fake = X - loo_mu_fake
    solved = np.linalg.solve(sigma, np.stack([diff_real, diff_fake], axis=-1))
    score = _discriminant(diff_real, diff_fake, solved[..., 0], solved[..., 1], log_prior_ratio)
    return _decide(expit(score))


def naive_loo_decisions(X: np.ndarray, is_real: np.ndarray, subset: SubsetMask) -> np.ndarray:
    """Решения leave-one-out полным переобучением на каждом шаге"""
    X = np.asarray(X, dtype=np.float64)[:, list(subset.indices)]
    is_real = np.asarray(is_real, dtype=bool)
    decisions = np.zeros(len(X), dtype=bool)
    keep = np.ones(len(X), dtype=bool)
    for i in range(len(X)):
        keep[i] = False
        model = fit_lda_arrays(X[keep], is_real[keep])
        keep[i] = True
        decisions[i] = bool(_decide(np.array(posterior_real(model, X[i]))))
    return decisions


def confusion(decisions: np.ndarray, is_real: np.ndarray) -> EvaluationResult:
    decisions = np.asarray(decisions, dtype=bool)
    is_real = np.asarray(is_real, dtype=bool)
    return EvaluationResult(
        false_accepts=int(np.sum(decisions & ~is_real)),
        false_rejects=int(np.sum(~decisions & is_real)),
        n_real=int(is_real.sum()),
        n_fake=int((~is_real).sum()),
    )


def evaluate_subset(stats: ScatterStatistics, subset: SubsetMask) -> EvaluationResult:
    return confusion(loo_decisions(stats, subset), stats.is_real)


def loo_evaluate(samples: Sequence[LabeledSample], subset: SubsetMask,
                 method: str = "fast") -> EvaluationResult:
    """
    Оценка leave-one-out на образцах одного сенсора

    Args:
        samples: образцы одного сенсора, не меньше трёх в каждом классе
        subset: выбранные признаки
        method: "fast" (достаточные статистики) или "naive" (переобучение)
    """
    check_single_sensor(samples)
    X, is_real = samples_to_arrays(samples)
    if method == "fast":
        return evaluate_subset(ScatterStatistics.from_arrays(X, is_real), subset)
    if method == "naive":
        n_real, n_fake = int(is_real.sum()), int((~is_real).sum())
        if n_real < 3 or n_fake < 3:
            raise DegenerateTraining(
                f"leave-one-out needs >= 3 samples per class, got {n_real} real and {n_fake} fake"
            )
        return confusion(naive_loo_decisions(X, is_real, subset), is_real)
    raise ValueError(f"unknown evaluation method: {method}")
