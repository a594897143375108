"""
Модуль Selection - полный перебор подмножеств признаков и межсенсорные отчёты

Выбор признаков делается отдельно для каждого сенсора: все 2^n - 1 подмножеств
оцениваются по ACE leave-one-out, лучшие по мощности образуют лестницу.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from liveprint.config import Config
from liveprint.errors import TooFewSamples, UnknownSensor, ZeroVariance
from liveprint.modules.classification import (
    EvaluationResult,
    LabeledSample,
    ScatterStatistics,
    SubsetMask,
    all_subsets,
    check_single_sensor,
    confusion,
    evaluate_subset,
    naive_loo_decisions,
    samples_to_arrays,
)
from liveprint.modules.quality_features import FEATURE_PROPERTIES, RidgeProperty

logger = logging.getLogger(__name__)

DISCRIMINANT_LEVELS = ("High", "Medium", "Low")


@dataclass(frozen=True)
class SubsetOutcome:
    subset: SubsetMask
    result: EvaluationResult

    def rank(self) -> Tuple[int, int, Tuple[int, ...]]:
        """ACE, затем меньшая мощность, затем более ранние признаки"""
        return (self.result.ace_key,) + self.subset.sort_key()


@dataclass
class SelectionReport:
    """Лучшие подмножества для каждой мощности и общий оптимум"""
    sensor: str
    feature_names: Tuple[str, ...]
    ladder: Dict[int, SubsetOutcome]
    optimum: SubsetOutcome
    evaluated: int
    skipped: List[SubsetMask] = field(default_factory=list)


def _evaluate_all(X: np.ndarray, is_real: np.ndarray, subsets: List[SubsetMask],
                  method: str, workers: int) -> List[Optional[EvaluationResult]]:
    if method == "fast":
        stats = ScatterStatistics.from_arrays(X, is_real)

        def evaluate(subset: SubsetMask) -> Optional[EvaluationResult]:
            try:
                return evaluate_subset(stats, subset)
            except ZeroVariance:
                return None
    elif method == "naive":
        def evaluate(subset: SubsetMask) -> Optional[EvaluationResult]:
            try:
                return confusion(naive_loo_decisions(X, is_real, subset), is_real)
            except ZeroVariance:
                return None
    else:
        raise ValueError(f"unknown evaluation method: {method}")

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(evaluate, subsets))
    return [evaluate(subset) for subset in subsets]


def exhaustive_search(X: np.ndarray, is_real: np.ndarray,
                      feature_names: Sequence[str] = Config.FEATURE_NAMES,
                      sensor: str = "", method: str = "fast", workers: int = 1) -> SelectionReport:
    """
    Полный перебор подмножеств по матрице признаков

    Args:
        X: признаки (n, D)
        is_real: метки (n,), True - живой
        feature_names: имена D признаков
        sensor: имя сенсора для отчёта
        method: "fast" или "naive" (эталонное переобучение)
        workers: число потоков
    """
    X = np.asarray(X, dtype=np.float64)
    is_real = np.asarray(is_real, dtype=bool)
    n_real, n_fake = int(is_real.sum()), int((~is_real).sum())
    if n_real < 3 or n_fake < 3:
        raise TooFewSamples(f"need >= 3 samples per class, got {n_real} real and {n_fake} fake")
    if X.shape[1] != len(feature_names):
        raise ValueError(f"{X.shape[1]} feature columns but {len(feature_names)} names")

    subsets = list(all_subsets(X.shape[1]))
    logger.info("evaluating %d feature subsets on %d samples", len(subsets), len(X))
    results = _evaluate_all(X, is_real, subsets, method, workers)

    outcomes: List[SubsetOutcome] = []
    skipped: List[SubsetMask] = []
    for subset, result in zip(subsets, results):
        if result is None:
            logger.warning("subset %s skipped: zero within-class variance", subset.bitstring)
            skipped.append(subset)
        else:
            outcomes.append(SubsetOutcome(subset, result))
    if not outcomes:
        raise ZeroVariance("every feature subset has zero within-class variance")

    ladder: Dict[int, SubsetOutcome] = {}
    for outcome in outcomes:
        k = outcome.subset.cardinality
        if k not in ladder or outcome.rank() < ladder[k].rank():
            ladder[k] = outcome
    optimum = min(ladder.values(), key=SubsetOutcome.rank)

    return SelectionReport(
        sensor=sensor,
        feature_names=tuple(feature_names),
        ladder=dict(sorted(ladder.items())),
        optimum=optimum,
        evaluated=len(subsets),
        skipped=skipped,
    )


def exhaustive_select(samples: Sequence[LabeledSample],
                      feature_names: Sequence[str] = Config.FEATURE_NAMES,
                      method: str = "fast", workers: int = 1) -> SelectionReport:
    """Выбор оптимального подмножества признаков для образцов одного сенсора"""
    sensor = check_single_sensor(samples)
    if not samples:
        raise TooFewSamples("no samples")
    X, is_real = samples_to_arrays(samples)
    return exhaustive_search(X, is_real, feature_names, sensor=sensor, method=method, workers=workers)


def filter_sensor(samples: Sequence[LabeledSample], sensor: str) -> List[LabeledSample]:
    selected = [s for s in samples if s.sensor == sensor]
    if not selected:
        known = sorted({s.sensor for s in samples})
        raise UnknownSensor(f"sensor {sensor!r} not in data (known: {', '.join(known)})")
    return selected


def group_by_sensor(samples: Sequence[LabeledSample]) -> Dict[str, List[LabeledSample]]:
    groups: Dict[str, List[LabeledSample]] = {}
    for sample in samples:
        groups.setdefault(sample.sensor, []).append(sample)
    return groups


def mean_rates(rows: Sequence[Tuple[float, float, float]]) -> Tuple[float, float, float]:
    """Строка TOTAL: невзвешенные средние столбцов FAR, FRR, ACE"""
    if not rows:
        raise ValueError("no rows to average")
    far, frr, ace = zip(*rows)
    return float(np.mean(far)), float(np.mean(frr)), float(np.mean(ace))


def grey_cell_aggregate(own_aces: Sequence[float]) -> float:
    """Средний ACE оптимальных подмножеств, каждое на своём наборе данных"""
    if not own_aces:
        raise ValueError("no own-subset results")
    return float(np.mean(own_aces))


@dataclass
class SubsetPerformance:
    """Одно подмножество на всех наборах данных"""
    label: str
    subset: SubsetMask
    results: Dict[str, EvaluationResult]

    @property
    def total(self) -> Tuple[float, float, float]:
        return mean_rates([(r.far, r.frr, r.ace) for r in self.results.values()])


@dataclass
class CrossSensorReport:
    feature_names: Tuple[str, ...]
    sensors: List[str]
    rows: List[SubsetPerformance]
    optimal_ace: Optional[float]
    best_generalizing: str

    @property
    def correct_rate(self) -> Optional[float]:
        return None if self.optimal_ace is None else 100.0 - self.optimal_ace


def cross_sensor_report(datasets: Mapping[str, Sequence[LabeledSample]],
                        subsets: Mapping[str, SubsetMask],
                        feature_names: Sequence[str] = Config.FEATURE_NAMES) -> CrossSensorReport:
    """
    Производительность каждого выбранного подмножества на каждом наборе данных

    Args:
        datasets: сенсор -> образцы
        subsets: метка -> подмножество; метка, совпадающая с именем сенсора, считается
            оптимальным подмножеством этого сенсора
        feature_names: имена признаков
    """
    if not datasets:
        raise TooFewSamples("no datasets to evaluate")
    if not subsets:
        raise ValueError("no subsets to evaluate")
    sensors = sorted(datasets)
    stats = {sensor: ScatterStatistics.from_samples(datasets[sensor]) for sensor in sensors}

    rows = []
    for label, subset in subsets.items():
        results = {sensor: evaluate_subset(stats[sensor], subset) for sensor in sensors}
        rows.append(SubsetPerformance(label=label, subset=subset, results=results))

    own = [row.results[row.label].ace for row in rows if row.label in datasets]
    best = min(rows, key=lambda row: row.total[2])
    return CrossSensorReport(
        feature_names=tuple(feature_names),
        sensors=sensors,
        rows=rows,
        optimal_ace=grey_cell_aggregate(own) if own else None,
        best_generalizing=best.label,
    )


def ace_evolution(report: SelectionReport) -> List[Tuple[int, float]]:
    """Ряд (число признаков, ACE лучшего подмножества)"""
    return [(k, outcome.result.ace) for k, outcome in report.ladder.items()]


def entry_cardinality(report: SelectionReport) -> Dict[str, int]:
    """Наименьшая мощность, при которой признак входит в лучшее подмножество"""
    n = len(report.feature_names)
    entry = {name: n + 1 for name in report.feature_names}
    for k, outcome in report.ladder.items():
        for name in outcome.subset.names(report.feature_names):
            entry[name] = min(entry[name], k)
    return entry


@dataclass(frozen=True)
class PropertySummary:
    ridge_property: RidgeProperty
    level: str
    mean_entry: float
    features: Tuple[str, ...]
    selected: Tuple[str, ...]


def property_summary(report: SelectionReport) -> List[PropertySummary]:
    """
    Дискриминирующая способность свойств гребней

    Свойства ранжируются по средней мощности входа их признаков в лестницу
    (раньше - выше); в summary также признаки свойства из оптимума.
    """
    entry = entry_cardinality(report)
    optimum = set(report.optimum.subset.names(report.feature_names))
    scored = []
    for prop in RidgeProperty:
        names = tuple(n for n in report.feature_names
                      if n in FEATURE_PROPERTIES and FEATURE_PROPERTIES[n][0] is prop)
        if not names:
            continue
        scored.append((float(np.mean([entry[n] for n in names])), prop, names))

    ordered = sorted(scored, key=lambda item: item[0])
    summaries = []
    for rank, (mean_entry, prop, names) in enumerate(ordered):
        level = DISCRIMINANT_LEVELS[min(rank, len(DISCRIMINANT_LEVELS) - 1)]
        summaries.append(PropertySummary(
            ridge_property=prop,
            level=level,
            mean_entry=mean_entry,
            features=names,
            selected=tuple(n for n in names if n in optimum),
        ))
    return sorted(summaries, key=lambda s: list(RidgeProperty).index(s.ridge_property))


def consistent_features(reports: Sequence[SelectionReport]) -> List[str]:
    """Признаки, входящие в оптимальное подмножество каждого сенсора"""
    if not reports:
        return []
    names = reports[0].feature_names
    common = set(names)
    for report in reports:
        common &= set(report.optimum.subset.names(report.feature_names))
    return [n for n in names if n in common]

