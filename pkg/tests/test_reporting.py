import json

import pytest

from conftest import make_samples, two_class_data
from liveprint.errors import BadHeader, BadLabel, BadRecord
from liveprint.modules.classification import Label, SubsetMask, compute_ace
from liveprint.modules.quality_features import FeatureVector
from liveprint.modules.reporting import (
    FEATURE_CSV_HEADER,
    cross_sensor_to_dict,
    format_percent,
    read_feature_csv,
    render_cross_sensor_table,
    render_selection_table,
    selection_to_dict,
    to_json,
    write_feature_csv,
)
from liveprint.modules.selection import cross_sensor_report, exhaustive_search


@pytest.fixture
def selection_report(rng):
    X, is_real = two_class_data(rng, n_per_class=10, d=10, shift=0.6)
    return exhaustive_search(X, is_real, sensor="biometrika")


class TestFormatting:
    @pytest.mark.parametrize("value, text", [
        (1.835, "1.84"), (2.675, "2.68"), (0.005, "0.01"), (6.56, "6.56"), (0.0, "0.00"),
    ])
    def test_half_away_from_zero(self, value, text):
        assert format_percent(value) == text

    def test_precision(self):
        assert format_percent(12.3456, 1) == "12.3"

    def test_ace_of_table_row(self):
        assert format_percent(compute_ace(2.12, 1.54)) == "1.83"


class TestSelectionTable:
    def test_ten_ladder_rows_and_optimum(self, selection_report):
        lines = render_selection_table(selection_report).splitlines()
        ladder_rows = [line for line in lines if line.strip()[:2].strip().isdigit()]
        assert len(ladder_rows) == 10
        assert sum("<- optimum" in line for line in lines) == 1
        assert lines[-1].startswith("Optimal subset:")

    def test_json_mirror(self, selection_report):
        data = selection_to_dict(selection_report)
        assert len(data["ladder"]) == 10
        assert data["optimum"]["subset"] == selection_report.optimum.subset.bitstring
        assert [k for k, _ in data["ace_evolution"]] == list(range(1, 11))
        assert to_json(data) == to_json(json.loads(to_json(data)))


class TestCrossSensorTable:
    def test_total_row_and_aggregate(self, rng):
        X, is_real = two_class_data(rng, n_per_class=10, d=10, shift=0.6)
        samples = make_samples(X, is_real, sensor="italdata")
        report = cross_sensor_report({"italdata": samples}, {"italdata": SubsetMask.full()})
        text = render_cross_sensor_table(report)
        assert "TOTAL" in text
        assert "Optimal ACE (own subsets)" in text
        data = cross_sensor_to_dict(report)
        assert data["rows"][0]["total"]["ace"] == data["rows"][0]["results"]["italdata"]["ace"]
        assert data["best_generalizing"] == "italdata"


class TestFeatureCsv:
    def rows(self):
        features = FeatureVector.from_values([0.1 * i for i in range(10)])
        return [("a.pgm", "biometrika", Label.REAL, features),
                ("b.pgm", "biometrika", Label.FAKE, features)]

    def test_thirteen_columns(self):
        lines = write_feature_csv(self.rows()).splitlines()
        assert lines[0] == ",".join(FEATURE_CSV_HEADER)
        assert len(lines) == 3
        assert all(len(line.split(",")) == 13 for line in lines)
        assert lines[1].startswith("a.pgm,biometrika,real,0.000000,0.100000")

    def test_read_back(self):
        samples = read_feature_csv(write_feature_csv(self.rows()))
        assert [s.label for s in samples] == [Label.REAL, Label.FAKE]
        assert samples[0].features[3] == pytest.approx(0.3)
        assert samples[0].material is None

    def test_bad_header(self):
        with pytest.raises(BadHeader):
            read_feature_csv("id,sensor,label\n")

    def test_bad_label(self):
        text = write_feature_csv(self.rows()).replace(",fake,", ",live,")
        with pytest.raises(BadLabel):
            read_feature_csv(text)

    def test_short_row(self):
        text = ",".join(FEATURE_CSV_HEADER) + "\na.pgm,s,real,0.1\n"
        with pytest.raises(BadRecord):
            read_feature_csv(text)
