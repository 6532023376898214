import json
import math

import pytest

from freestm.schemas.common import Classification, ExperimentKind, OutputFormat
from freestm.services.analysis import bound_table
from freestm.services.exporters import (
    CSV_COLUMNS,
    csv_rows,
    describe_outputs,
    format_value,
    get_result_writer,
    write_results,
)


@pytest.fixture
def bounds_report():
    report = bound_table(1.0, 4.0, 0.0, 16.0, [0.25, 4.0], seed=7)
    return report.model_copy(update={"config_hash": "ab" * 32})


@pytest.mark.parametrize(
    "value, expected",
    [
        (None, ""),
        (True, "true"),
        (3, "3"),
        (0.1, "0.10000000000000001"),
        (8 / 33, "0.24242424242424243"),
        (math.inf, "inf"),
        (Classification.stable, "stable"),
        ("ito_free_limit", "ito_free_limit"),
    ],
)
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_every_kind_has_columns():
    assert set(CSV_COLUMNS) == set(ExperimentKind)


def test_bounds_csv(tmp_path, bounds_report):
    (path,) = write_results(ExperimentKind.bounds, bounds_report, tmp_path / "out", [OutputFormat.csv])

    assert path.name == "bounds.csv"
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == f"# freestm schema=1 config_hash={'ab' * 32} seed=7"
    assert lines[1] == "h,decay_rate,theoretically_stable"
    assert lines[2] == "0.25,2.6666666666666665,true"
    assert lines[3] == "4,0.24242424242424243,true"
    assert len(lines) == 4


def test_csv_rows_match_columns(bounds_report):
    rows = list(csv_rows(ExperimentKind.bounds, bounds_report))
    assert all(len(row) == len(CSV_COLUMNS[ExperimentKind.bounds]) for row in rows)


def test_json_sidecar(tmp_path, bounds_report):
    (path,) = write_results(ExperimentKind.bounds, bounds_report, tmp_path, [OutputFormat.json])

    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["config_hash"] == "ab" * 32
    assert data["seed"] == 7
    assert data["h_max"] == math.inf
    assert [p["h"] for p in data["points"]] == [0.25, 4.0]


def test_svg_is_reproducible(tmp_path, bounds_report):
    first = write_results(ExperimentKind.bounds, bounds_report, tmp_path / "a", [OutputFormat.svg])[0]
    second = write_results(ExperimentKind.bounds, bounds_report, tmp_path / "b", [OutputFormat.svg])[0]

    text = first.read_text(encoding="utf-8")
    assert f"config_hash={'ab' * 32}" in text
    assert "<dc:date>" not in text
    assert first.read_bytes() == second.read_bytes()


def test_describe_outputs(tmp_path, bounds_report):
    paths = write_results(ExperimentKind.bounds, bounds_report, tmp_path, [OutputFormat.csv, OutputFormat.json])

    described = describe_outputs(paths)
    assert [name for name, _ in described] == ["bounds.csv", "bounds.json"]
    assert all(len(digest) == 64 for _, digest in described)


def test_unknown_format():
    with pytest.raises(ValueError, match="Unknown output format"):
        get_result_writer("xlsx")
