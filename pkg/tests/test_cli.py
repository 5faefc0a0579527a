import csv
import io
import json
import math

import pytest
from click.testing import CliRunner

from pottsmeta.cli import main, parse_theta


@pytest.fixture
def runner():
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:  # click >= 8.2 keeps the streams apart already
        return CliRunner()


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.mark.parametrize(
    "text, value",
    [("pi", math.pi), ("pi/3", math.pi / 3), ("2pi/3", 2 * math.pi / 3), ("5*pi/3", 5 * math.pi / 3), ("-pi/3", 5 * math.pi / 3), ("1.25", 1.25), ("2pi", 0.0)],
)
def test_parse_theta(text, value):
    assert parse_theta(text) == pytest.approx(value, abs=1e-15)


def test_landscape_small_grid(runner):
    res = runner.invoke(main, ["landscape", "--beta", "2.4", "--grid", "3"])
    assert res.exit_code == 0
    table = rows(res.stdout)
    assert table[0] == ["x1", "x2", "F"]
    values = [r[2] for r in table[1:]]
    assert len(values) == 9
    assert sum(v != "nan" for v in values) == 6
    # Three vertices at equal height by symmetry.
    vertices = {(r[0], r[1]): float(r[2]) for r in table[1:] if (r[0], r[1]) in {("0", "0"), ("1", "0"), ("0", "1")}}
    assert max(vertices.values()) - min(vertices.values()) < 1e-15


def test_landscape_single_well(runner, tmp_path):
    out = tmp_path / "f.csv"
    res = runner.invoke(main, ["landscape", "--beta", "1.6", "--grid", "61", "--out", str(out)])
    assert res.exit_code == 0
    table = [r for r in rows(out.read_text())[1:] if r[2] != "nan"]
    best = min(table, key=lambda r: float(r[2]))
    assert abs(float(best[0]) - 1 / 3) < 0.02 and abs(float(best[1]) - 1 / 3) < 0.02
    manifest = json.loads((tmp_path / "f.csv.manifest.json").read_text())
    assert manifest["schema_version"] == 1 and manifest["command"] == "landscape"


def test_csv_has_17_significant_digits(runner):
    res = runner.invoke(main, ["critical", "--beta", "2.4", "--format", "csv"])
    table = rows(res.stdout)
    for row in table[1:]:
        for cell in row[2:8]:
            assert cell == format(float(cell), ".17g")


def test_critical_json(runner):
    res = runner.invoke(main, ["critical", "--beta", "2.4"])
    assert res.exit_code == 0
    doc = json.loads(res.stdout)
    assert doc["schema_version"] == 1
    assert [c["label"] for c in doc["critical_points"]] == ["m0", "m1", "m2", "σ0", "σ1", "σ2", "p"]
    assert doc["regime"] == "ZF-I"


def test_phases_three_bands(runner):
    res = runner.invoke(main, ["phases", "--theta", "pi", "--beta", "2.05..4", "--r", "0.001..0.3", "--resolution", "30", "--format", "csv"])
    assert res.exit_code == 0
    labels = {r[2] for r in rows(res.stdout)[1:]}
    assert labels == {"Field-π-I", "Field-π-II", "Field-π-III"}


def test_predict(runner):
    res = runner.invoke(main, ["predict", "--beta", "2.4", "--n", "60", "--from", "0"])
    assert res.exit_code == 0
    pred = json.loads(res.stdout)["prediction"]
    assert pred["jump_distribution"] == {"1": 0.5, "2": 0.5}
    assert pred["mean_time"] == pytest.approx(2.0023e6, rel=1e-4)


def test_exit_codes(runner):
    assert runner.invoke(main, ["predict", "--beta", "2", "--n", "60"]).exit_code == 3
    assert runner.invoke(main, ["landscape", "--beta", "2", "--grid", "5000"]).exit_code == 2
    assert runner.invoke(main, ["landscape", "--beta", "-1"]).exit_code == 2
    assert runner.invoke(main, ["simulate", "--beta", "2.4", "--n", "30"]).exit_code == 2  # --seed missing
    assert runner.invoke(main, ["simulate", "--beta", "2.4", "--n", "30000", "--seed", "1"]).exit_code == 4
    assert runner.invoke(main, ["landscape", "-b", "2"]).exit_code == 2  # long flags only


def test_simulate_and_rerun_is_byte_identical(runner, tmp_path):
    out = tmp_path / "s.csv"
    args = ["simulate", "--beta", "2.4", "--n", "25", "--seed", "9", "--replicas", "8", "--format", "csv", "--out", str(out)]
    assert runner.invoke(main, args).exit_code == 0
    table = rows(out.read_text())
    assert table[0] == ["replica", "hitting_time", "target", "events", "censored"]
    assert len(table) == 9
    out2 = tmp_path / "s2.csv"
    res = runner.invoke(main, ["rerun", "--manifest", str(out) + ".manifest.json", "--out", str(out2)])
    assert res.exit_code == 0
    assert out.read_bytes() == out2.read_bytes()


def test_threads_env_is_honored(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("POTTS_THREADS", "2")
    out = tmp_path / "t.csv"
    res = runner.invoke(main, ["simulate", "--beta", "2.4", "--n", "25", "--seed", "9", "--replicas", "8", "--format", "csv", "--out", str(out)])
    assert res.exit_code == 0
    monkeypatch.delenv("POTTS_THREADS")
    out1 = tmp_path / "t1.csv"
    runner.invoke(main, ["simulate", "--beta", "2.4", "--n", "25", "--seed", "9", "--replicas", "8", "--format", "csv", "--out", str(out1)])
    assert out.read_bytes() == out1.read_bytes()


def test_event_log(runner, tmp_path):
    log = tmp_path / "log.csv"
    res = runner.invoke(main, ["simulate", "--beta", "2.4", "--n", "20", "--seed", "1", "--replicas", "2", "--event-log", str(log)])
    assert res.exit_code == 0
    assert rows(log.read_text())[0] == ["label", "entry_time", "sojourn"]


def test_validate_fast(runner):
    res = runner.invoke(main, ["validate", "--level", "fast"])
    assert res.exit_code == 0
    doc = json.loads(res.stdout)
    assert doc["passed"] and len(doc["checks"]) == 10
