"""
Главный модуль liveprint - оркестратор всех компонентов
"""
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from liveprint.config import ToolConfig
from liveprint.errors import LivenessError, TooFewSamples, UnknownSensor
from liveprint.modules.classification import Label, LabeledSample, SubsetMask
from liveprint.modules.image_core import GrayImage, read_pgm
from liveprint.modules.manifest import ManifestRecord, read_manifest
from liveprint.modules.quality_features import FeatureExtraction, FeatureVector, extract_with_diagnostics
from liveprint.modules.reporting import write_feature_csv
from liveprint.modules.ridge_analysis import (
    OrientationField,
    compute_gradients,
    orientation_field,
)
from liveprint.modules.segmentation import SegmentationMask, segment
from liveprint.modules.selection import (
    CrossSensorReport,
    SelectionReport,
    cross_sensor_report,
    exhaustive_select,
    filter_sensor,
    group_by_sensor,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionFailure:
    sample_id: str
    error_name: str
    message: str


@dataclass
class ExtractionBatch:
    """Результат пакетного извлечения: строки CSV, ошибки и предупреждения по образцам"""
    rows: List[Tuple[str, str, Label, FeatureVector]] = field(default_factory=list)
    failures: List[ExtractionFailure] = field(default_factory=list)
    warnings: List[Tuple[str, str]] = field(default_factory=list)

    def log_lines(self) -> List[str]:
        """Строки журнала ошибок: sample_id<TAB>ErrorName<TAB>message"""
        lines = [f"{f.sample_id}\t{f.error_name}\t{f.message}" for f in self.failures]
        lines += [f"{sample_id}\tWARNING\t{message}" for sample_id, message in self.warnings]
        return lines


def _extract_path(task: Tuple[str, ToolConfig]):
    """Извлечение признаков одного файла (функция верхнего уровня для пула процессов)"""
    path, config = task
    try:
        extraction = extract_with_diagnostics(read_pgm(path), config)
    except LivenessError as e:
        return None, e.name, str(e), []
    except OSError as e:
        return None, type(e).__name__, str(e), []
    return extraction.features, None, None, extraction.warnings


class LivenessToolkit:
    """
    Главный класс liveprint

    Реализует путь данных:
    1. Изображения из манифеста сегментируются
    2. Извлекаются десять мер качества
    3. Для каждого сенсора перебираются подмножества признаков
    4. Выбранные подмножества оцениваются на всех сенсорах
    """

    def __init__(self, config: Optional[ToolConfig] = None):
        """
        Инициализация

        Args:
            config: конфигурация (по умолчанию - значения по умолчанию)
        """
        self.config = config or ToolConfig()

    def extract_image(self, img: GrayImage) -> FeatureExtraction:
        return extract_with_diagnostics(img, self.config)

    def segment_image(self, img: GrayImage) -> Tuple[SegmentationMask, OrientationField]:
        """Маска переднего плана и поле ориентаций для отладочного вывода"""
        mask = segment(img, self.config.gabor, self.config.block_size)
        field_ = orientation_field(img, mask.grid, compute_gradients(img))
        return mask, field_

    def extract_records(self, records: Sequence[ManifestRecord],
                        base_dir: Union[str, Path, None] = None,
                        workers: Optional[int] = None) -> ExtractionBatch:
        """
        Извлечение признаков для записей манифеста

        Ошибки отдельных образцов не прерывают пакет; порядок строк - порядок манифеста.

        Args:
            records: записи манифеста
            base_dir: каталог для относительных путей
            workers: число процессов (по умолчанию runtime.workers)
        """
        workers = workers or self.config.runtime.workers
        tasks = [(str(r.resolve(base_dir)), self.config) for r in records]
        if workers > 1 and len(tasks) > 1:
            with Pool(processes=workers) as pool:
                outcomes = list(pool.imap(_extract_path, tasks))
        else:
            outcomes = [_extract_path(task) for task in tasks]

        batch = ExtractionBatch()
        for record, (features, error_name, message, warnings) in zip(records, outcomes):
            if features is None:
                logger.warning("extraction failed for %s: %s: %s", record.sample_id, error_name, message)
                batch.failures.append(ExtractionFailure(record.sample_id, error_name, message))
                continue
            for warning in warnings:
                batch.warnings.append((record.sample_id, warning))
            batch.rows.append((record.sample_id, record.sensor, record.label, features))
        logger.info("extracted %d of %d samples", len(batch.rows), len(records))
        return batch

    def run_extract(self, manifest_path: Union[str, Path], out_path: Union[str, Path],
                    workers: Optional[int] = None) -> ExtractionBatch:
        """Манифест -> CSV признаков и журнал ошибок <out>.errors.log"""
        manifest_path = Path(manifest_path)
        records = read_manifest(manifest_path)
        batch = self.extract_records(records, manifest_path.parent, workers)

        out_path = Path(out_path)
        out_path.write_text(write_feature_csv(batch.rows), encoding="utf-8")
        log_path = out_path.with_name(out_path.name + ".errors.log")
        lines = batch.log_lines()
        if lines:
            log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        elif log_path.exists():
            log_path.unlink()
        return batch

    def select(self, samples: Sequence[LabeledSample], sensor: str) -> SelectionReport:
        """
        Полный перебор подмножеств признаков для одного сенсора

        Args:
            samples: образцы всех сенсоров
            sensor: сенсор, для которого выбираются признаки
        """
        selected = filter_sensor(samples, sensor)
        n_real = sum(1 for s in selected if s.label is Label.REAL)
        n_fake = len(selected) - n_real
        if n_real < 3 or n_fake < 3:
            raise TooFewSamples(
                f"sensor {sensor!r} has {n_real} real and {n_fake} fake samples, need >= 3 each"
            )
        return exhaustive_select(selected, workers=self.config.runtime.workers)

    def evaluate(self, samples: Sequence[LabeledSample], subsets: Mapping[str, SubsetMask],
                 sensors: Optional[Sequence[str]] = None) -> CrossSensorReport:
        """
        Оценка выбранных подмножеств на наборах данных сенсоров

        Args:
            samples: образцы всех сенсоров
            subsets: метка -> подмножество
            sensors: ограничение списка сенсоров (по умолчанию все)
        """
        groups = group_by_sensor(samples)
        if sensors:
            unknown = [s for s in sensors if s not in groups]
            if unknown:
                raise UnknownSensor(f"sensors not in data: {', '.join(unknown)}")
            groups = {s: groups[s] for s in sensors}
        datasets: Dict[str, List[LabeledSample]] = groups
        return cross_sensor_report(datasets, subsets)
