"""
Модуль Reporting - таблицы результатов, JSON-зеркала и CSV признаков
"""
import csv
import io
import json
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Dict, List, Sequence, Tuple

from liveprint.config import Config
from liveprint.errors import BadHeader, BadLabel, BadRecord
from liveprint.modules.classification import EvaluationResult, Label, LabeledSample
from liveprint.modules.quality_features import FeatureVector
from liveprint.modules.selection import (
    CrossSensorReport,
    PropertySummary,
    SelectionReport,
    ace_evolution,
)

FEATURE_CSV_HEADER = ("sample_id", "sensor", "label") + tuple(Config.FEATURE_NAMES)


def format_percent(value: float, precision: int = 2) -> str:
    """Округление половины от нуля по десятичной записи числа"""
    quantum = Decimal(1).scaleb(-precision)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def _rounded(value: float, precision: int) -> float:
    return float(format_percent(value, precision))


def _result_dict(result: EvaluationResult, precision: int) -> Dict[str, Any]:
    return {
        "far": _rounded(result.far, precision),
        "frr": _rounded(result.frr, precision),
        "ace": _rounded(result.ace, precision),
        "false_accepts": result.false_accepts,
        "false_rejects": result.false_rejects,
        "n_real": result.n_real,
        "n_fake": result.n_fake,
    }


def render_selection_table(report: SelectionReport, precision: int = 2) -> str:
    """
    Лестница лучших подмножеств: строки - число признаков, столбцы - флаги включения и ACE

    Args:
        report: результат полного перебора
        precision: знаков после запятой
    """
    names = report.feature_names
    widths = [max(len(n), 1) for n in names]
    header = " | ".join(["# features"] + [n.ljust(w) for n, w in zip(names, widths)] + ["ACE (%)"])
    lines = [f"Sensor: {report.sensor or '-'}", header, "-" * len(header)]
    for k, outcome in report.ladder.items():
        flags = ["x".ljust(w) if bit else "-".ljust(w) for bit, w in zip(outcome.subset.bits, widths)]
        marker = "  <- optimum" if outcome.subset == report.optimum.subset else ""
        lines.append(" | ".join([str(k).rjust(10)] + flags
                                + [format_percent(outcome.result.ace, precision)]) + marker)
    lines.append(
        f"Optimal subset: {','.join(report.optimum.subset.names(names))} "
        f"ACE {format_percent(report.optimum.result.ace, precision)}%"
    )
    if report.skipped:
        lines.append(f"Skipped subsets (zero variance): {len(report.skipped)}")
    return "\n".join(lines) + "\n"


def render_cross_sensor_table(report: CrossSensorReport, precision: int = 2) -> str:
    """Таблица FAR/FRR/ACE каждого подмножества на каждом сенсоре и строка TOTAL"""
    lines = []
    for row in report.rows:
        lines.append(f"Subset {row.label}: {','.join(row.subset.names(report.feature_names))}")
        lines.append(f"{'Sensor':<16} {'FAR':>8} {'FRR':>8} {'ACE':>8}")
        for sensor in report.sensors:
            r = row.results[sensor]
            lines.append(f"{sensor:<16} {format_percent(r.far, precision):>8} "
                         f"{format_percent(r.frr, precision):>8} {format_percent(r.ace, precision):>8}")
        far, frr, ace = row.total
        lines.append(f"{'TOTAL':<16} {format_percent(far, precision):>8} "
                     f"{format_percent(frr, precision):>8} {format_percent(ace, precision):>8}")
        lines.append("")
    if report.optimal_ace is not None:
        lines.append(f"Optimal ACE (own subsets): {format_percent(report.optimal_ace, precision)}%")
        lines.append(f"Correct classification: {format_percent(report.correct_rate, precision)}%")
    lines.append(f"Best generalizing subset: {report.best_generalizing}")
    return "\n".join(lines) + "\n"


def render_property_summary(summaries: Sequence[PropertySummary]) -> str:
    """Дискриминирующая способность свойств гребней и их признаки в оптимуме"""
    lines = [f"{'Property':<20} {'Level':<8} Selected"]
    for s in summaries:
        selected = ",".join(s.selected) if s.selected else "-"
        lines.append(f"{s.ridge_property.value:<20} {s.level:<8} {selected}")
    return "\n".join(lines) + "\n"


def selection_to_dict(report: SelectionReport, precision: int = 2) -> Dict[str, Any]:
    return {
        "sensor": report.sensor,
        "feature_names": list(report.feature_names),
        "evaluated": report.evaluated,
        "skipped": [s.bitstring for s in report.skipped],
        "ladder": [
            {
                "cardinality": k,
                "subset": outcome.subset.bitstring,
                "features": outcome.subset.names(report.feature_names),
                **_result_dict(outcome.result, precision),
            }
            for k, outcome in report.ladder.items()
        ],
        "optimum": {
            "subset": report.optimum.subset.bitstring,
            "features": report.optimum.subset.names(report.feature_names),
            **_result_dict(report.optimum.result, precision),
        },
        "ace_evolution": [[k, _rounded(ace, precision)] for k, ace in ace_evolution(report)],
    }


def cross_sensor_to_dict(report: CrossSensorReport, precision: int = 2) -> Dict[str, Any]:
    rows = []
    for row in report.rows:
        far, frr, ace = row.total
        rows.append({
            "label": row.label,
            "subset": row.subset.bitstring,
            "features": row.subset.names(report.feature_names),
            "results": {s: _result_dict(row.results[s], precision) for s in report.sensors},
            "total": {"far": _rounded(far, precision), "frr": _rounded(frr, precision),
                      "ace": _rounded(ace, precision)},
        })
    optimal = report.optimal_ace
    return {
        "sensors": list(report.sensors),
        "rows": rows,
        "optimal_ace": None if optimal is None else _rounded(optimal, precision),
        "correct_rate": None if optimal is None else _rounded(report.correct_rate, precision),
        "best_generalizing": report.best_generalizing,
    }


def properties_to_dict(summaries: Sequence[PropertySummary]) -> List[Dict[str, Any]]:
    return [
        {"property": s.ridge_property.value, "level": s.level,
         "features": list(s.features), "selected": list(s.selected)}
        for s in summaries
    ]


def to_json(data: Dict[str, Any]) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_feature_csv(rows: Sequence[Tuple[str, str, Label, FeatureVector]]) -> str:
    """
    CSV признаков: заголовок и одна строка на образец

    Args:
        rows: (sample_id, sensor, label, features) в порядке манифеста
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(FEATURE_CSV_HEADER)
    for sample_id, sensor, label, features in rows:
        values = [f"{v:.{Config.FEATURE_DECIMALS}f}" for v in features.as_tuple()]
        writer.writerow([sample_id, sensor, label.value] + values)
    return buffer.getvalue()


def read_feature_csv(text: str) -> List[LabeledSample]:
    """Образцы из CSV признаков (material не хранится)"""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != FEATURE_CSV_HEADER:
        raise BadHeader(f"feature CSV header must be {','.join(FEATURE_CSV_HEADER)}")

    samples = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(FEATURE_CSV_HEADER):
            raise BadRecord(f"line {line_no}: expected {len(FEATURE_CSV_HEADER)} columns, got {len(row)}")
        sample_id, sensor, label = (cell.strip() for cell in row[:3])
        try:
            parsed_label = Label.parse(label)
        except ValueError:
            raise BadLabel(f"line {line_no}: label must be real or fake, got {label!r}") from None
        try:
            features = FeatureVector.from_values(row[3:])
        except ValueError as e:
            raise BadRecord(f"line {line_no}: {e}") from e
        samples.append(LabeledSample(id=sample_id, sensor=sensor, label=parsed_label,
                                     features=features.as_tuple()))
    return samples
