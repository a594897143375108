"""
CLI интерфейс для liveprint
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import yaml

from liveprint import __version__
from liveprint.config import Config, ToolConfig, load_config
from liveprint.errors import BadSpec, LivenessError
from liveprint.main import LivenessToolkit
from liveprint.modules.classification import SubsetMask
from liveprint.modules.image_core import read_pgm, write_pgm
from liveprint.modules.reporting import (
    cross_sensor_to_dict,
    properties_to_dict,
    read_feature_csv,
    render_cross_sensor_table,
    render_property_summary,
    render_selection_table,
    selection_to_dict,
    to_json,
)
from liveprint.modules.ridge_analysis import orientation_csv, power_spectrum_profile, spectrum_csv
from liveprint.modules.segmentation import mask_to_image
from liveprint.modules.selection import property_summary
from liveprint.modules.synthetic import (
    SynthKind,
    SynthSpec,
    gen_synthetic_fingerprint,
    synthetic_corpus,
    write_corpus,
)

EXIT_OK = 0
EXIT_SAMPLE_FAILURES = 1
EXIT_USAGE = 2


def print_header(text: str):
    """Печать заголовка"""
    print("\n" + "=" * 60)
    print(f"  {text}")
    print("=" * 60 + "\n")


def print_section(text: str):
    """Печать секции"""
    print(f"\n--- {text} ---\n")


def parse_size(text: str):
    try:
        width, height = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise BadSpec(f"size must look like WxH, got {text!r}") from None
    return width, height


def parse_subset_specs(specs: List[str]) -> Dict[str, SubsetMask]:
    """
    Разбор аргументов --subset вида [LABEL:]NAMES

    Метка, совпадающая с именем сенсора, помечает оптимальное подмножество этого сенсора.
    """
    subsets: Dict[str, SubsetMask] = {}
    for spec in specs:
        label, _, names = spec.rpartition(":")
        names = names.strip()
        if set(names) <= {"0", "1"} and len(names) == len(Config.FEATURE_NAMES):
            mask = SubsetMask.from_bitstring(names)
        else:
            mask = SubsetMask.from_names(names)
        subsets[label.strip() or names] = mask
    return subsets


def _load_samples(path: str):
    return read_feature_csv(Path(path).read_text(encoding="utf-8"))


def cmd_extract(toolkit: LivenessToolkit, args) -> int:
    print_header("Извлечение признаков")
    batch = toolkit.run_extract(args.manifest, args.out, args.workers)
    print(f"✓ Образцов обработано: {len(batch.rows)}")
    if batch.failures:
        print(f"✗ Ошибок: {len(batch.failures)} (см. {args.out}.errors.log)")
        return EXIT_SAMPLE_FAILURES
    return EXIT_OK


def cmd_select(toolkit: LivenessToolkit, args) -> int:
    samples = _load_samples(args.features)
    report = toolkit.select(samples, args.sensor)
    precision = toolkit.config.report.precision
    print_header(f"Выбор признаков: {args.sensor}")
    print(render_selection_table(report, precision), end="")
    summaries = property_summary(report)
    print_section("Свойства гребней")
    print(render_property_summary(summaries), end="")
    if args.out:
        data = selection_to_dict(report, precision)
        data["properties"] = properties_to_dict(summaries)
        Path(args.out).write_text(to_json(data), encoding="utf-8")
    return EXIT_OK


def cmd_evaluate(toolkit: LivenessToolkit, args) -> int:
    samples = _load_samples(args.features)
    subsets = parse_subset_specs(args.subset)
    report = toolkit.evaluate(samples, subsets, args.sensor)
    precision = toolkit.config.report.precision
    print_header("Оценка подмножеств по сенсорам")
    print(render_cross_sensor_table(report, precision), end="")
    if args.out:
        Path(args.out).write_text(to_json(cross_sensor_to_dict(report, precision)), encoding="utf-8")
    return EXIT_OK


def cmd_segment(toolkit: LivenessToolkit, args) -> int:
    img = read_pgm(args.image)
    mask, field_ = toolkit.segment_image(img)
    write_pgm(args.out, mask_to_image(mask))
    print(f"✓ Блоков переднего плана: {mask.count} из {mask.grid.n_blocks}")
    if args.orientation_csv:
        Path(args.orientation_csv).write_text(orientation_csv(field_), encoding="utf-8")
    if args.spectrum_csv:
        profile = power_spectrum_profile(img, mask, toolkit.config.spectrum)
        Path(args.spectrum_csv).write_text(spectrum_csv(profile), encoding="utf-8")
    return EXIT_OK


def cmd_synth(toolkit: LivenessToolkit, args) -> int:
    width, height = parse_size(args.size)
    if args.corpus:
        items = synthetic_corpus(args.corpus, seed=args.seed, size=(width, height))
        manifest = write_corpus(items, args.out)
        print(f"✓ Корпус: {len(items)} изображений, манифест {manifest}")
        return EXIT_OK
    spec = SynthSpec(
        kind=SynthKind(args.kind),
        width=width,
        height=height,
        angle=args.angle,
        period=args.period,
        amplitude=args.amplitude,
        noise_sigma=args.noise,
        blur_sigma=args.blur,
        seed=args.seed,
    )
    write_pgm(args.out, gen_synthetic_fingerprint(spec))
    print(f"✓ Изображение записано: {args.out}")
    return EXIT_OK


def cmd_config(toolkit: LivenessToolkit, args) -> int:
    print(yaml.safe_dump(toolkit.config.to_flat(), sort_keys=True), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liveprint",
        description="Определение живого отпечатка по мерам качества одного изображения",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="YAML с плоскими ключами (иначе $LIVEPRINT_CONFIG)")
    parser.add_argument("--verbose", action="store_true", help="отладочный журнал")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="манифест -> CSV признаков")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("select", help="полный перебор подмножеств для сенсора")
    p.add_argument("features")
    p.add_argument("--sensor", required=True)
    p.add_argument("--out", help="JSON-отчёт")
    p.set_defaults(handler=cmd_select)

    p = sub.add_parser("evaluate", help="оценка подмножеств на всех сенсорах")
    p.add_argument("features")
    p.add_argument("--subset", action="append", required=True, help="[LABEL:]Q_E,Q_STD")
    p.add_argument("--sensor", action="append", default=None)
    p.add_argument("--out", help="JSON-отчёт")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("segment", help="отладочная маска сегментации")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--orientation-csv")
    p.add_argument("--spectrum-csv")
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("synth", help="синтетический отпечаток или корпус")
    p.add_argument("--kind", choices=[k.value for k in SynthKind], default=SynthKind.PARALLEL.value)
    p.add_argument("--size", default="256x256")
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--period", type=float, default=10.0)
    p.add_argument("--amplitude", type=float, default=100.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--blur", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", type=int, default=0, help="образцов в каждом классе")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("config", help="действующая конфигурация")
    p.set_defaults(handler=cmd_config)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format=Config.LOG_FORMAT)
    try:
        config: ToolConfig = load_config(args.config)
        return args.handler(LivenessToolkit(config), args)
    except LivenessError as e:
        print(f"Ошибка: {e.name}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as e:
        print(f"Ошибка: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
