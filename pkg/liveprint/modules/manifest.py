"""
Модуль Manifest - описание набора данных: путь к PGM, метка, сенсор, материал
"""
import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

from liveprint.errors import BadHeader, BadLabel, BadRecord, DuplicatePath
from liveprint.modules.classification import Label

MANIFEST_HEADER = ("path", "label", "sensor", "material")


@dataclass(frozen=True)
class ManifestRecord:
    """Строка манифеста; material только информационный"""
    path: str
    label: Label
    sensor: str
    material: Optional[str] = None

    @property
    def sample_id(self) -> str:
        return self.path

    def resolve(self, base_dir: Union[str, Path, None] = None) -> Path:
        """Относительные пути разрешаются относительно каталога манифеста"""
        path = Path(self.path)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return path


def parse_manifest(text: str) -> List[ManifestRecord]:
    """
    Разбор CSV-манифеста

    Args:
        text: содержимое файла с заголовком path,label,sensor,material
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != MANIFEST_HEADER:
        raise BadHeader(f"manifest header must be {','.join(MANIFEST_HEADER)}")

    records: List[ManifestRecord] = []
    seen = set()
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(MANIFEST_HEADER):
            raise BadRecord(f"line {line_no}: expected {len(MANIFEST_HEADER)} columns, got {len(row)}")
        path, label, sensor, material = (cell.strip() for cell in row)
        if not path or not sensor:
            raise BadRecord(f"line {line_no}: path and sensor must be non-empty")
        try:
            parsed = Label.parse(label)
        except ValueError:
            raise BadLabel(f"line {line_no}: label must be real or fake, got {label!r}") from None
        if path in seen:
            raise DuplicatePath(f"line {line_no}: duplicate path {path!r}")
        seen.add(path)
        records.append(ManifestRecord(path=path, label=parsed, sensor=sensor, material=material or None))
    return records


def read_manifest(path: Union[str, Path]) -> List[ManifestRecord]:
    return parse_manifest(Path(path).read_text(encoding="utf-8"))


def format_manifest(records: List[ManifestRecord]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(MANIFEST_HEADER)
    for r in records:
        writer.writerow([r.path, r.label.value, r.sensor, r.material or ""])
    return buffer.getvalue()
