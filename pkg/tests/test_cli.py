import csv
import json

import numpy as np
import pytest

from zrlab import cli
from zrlab.errors import ConfigError, InsufficientDataError

REPORTS = {"measures.csv", "spectral.csv", "decomposition.csv", "ensembles.csv", "simulate.csv",
           "identities.json", "inequalities.json"}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def verify_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("va")
    code = cli.main(["verify-all", "--L", "2,3", "--N", "1..3", "--out", str(out)])
    return code, out


def test_verify_all_writes_reports(verify_run):
    code, out = verify_run
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert REPORTS | {"manifest.json"} <= names
    assert "witness.json" not in names
    man = json.loads((out / "manifest.json").read_text())
    assert man["exit_code"] == 0 and man["violations"] == 0
    assert set(man["files"]) == REPORTS
    assert man["config"]["L"] == [2, 3] and man["config"]["N"] == [1, 2, 3]
    for name, cols in cli.HEADERS.items():
        if (out / name).exists():
            assert (out / name).read_text().splitlines()[0] == ",".join(cols)


def test_measures_normalised(verify_run):
    _, out = verify_run
    rows = _rows(out / "measures.csv")
    for key in {(r["rate"], r["L"], r["N"]) for r in rows}:
        total = sum(float(r["prob"]) for r in rows if (r["rate"], r["L"], r["N"]) == key)
        assert total == pytest.approx(1.0, abs=1e-12)


def test_rerun_is_byte_identical(verify_run, tmp_path):
    _, first = verify_run
    assert cli.main(["verify-all", "--L", "2,3", "--N", "1..3", "--out", str(tmp_path)]) == 0
    for name in REPORTS:
        assert (tmp_path / name).read_bytes() == (first / name).read_bytes(), name


def test_seconds_blank_without_timing(verify_run):
    _, out = verify_run
    assert all(r["seconds"] == "" for r in _rows(out / "spectral.csv"))


@pytest.mark.parametrize("argv", [
    ["gap", "--L", ""],
    ["gap", "--N", "3..1"],
    ["gap", "--rate", "quadratic"],
    ["gap", "--tol", "-1"],
    ["nonsense"],
])
def test_usage_errors(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv != ["nonsense"] else argv) == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("L = 2,3\ncolour = red\n")
    assert cli.main(["gap", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    with pytest.raises(ConfigError):
        cli.read_config_file(cfg)


def test_json_config_and_hash(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"L": [2], "N": "1..2", "rate": ["linear"]}))
    values = cli.read_config_file(cfg)
    a = cli.ExperimentConfig(experiment="gap", **values)
    b = cli.ExperimentConfig(experiment="gap", **values, out="elsewhere", threads=4)
    assert a.N == [1, 2] and a.hash() == b.hash()


def test_resource_cap_exit(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("sector_cap = 10\n")
    assert cli.main(["gap", "--config", str(cfg), "--L", "4", "--N", "6", "--out",
                     str(tmp_path)]) == 3


def test_gap_then_report(tmp_path):
    assert cli.main(["gap", "--rate", "linear", "--L", "2..8", "--N", "1,2", "--out",
                     str(tmp_path)]) == 0
    assert cli.main(["report", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "scaling.csv")
    pooled = next(r for r in rows if r["quantity"] == "inverse_gap" and r["series"] == "pooled")
    assert 1.8 <= float(pooled["slope"]) <= 2.2
    assert (tmp_path / "scaling.txt").read_text().startswith("log-log")


def test_report_missing_input(tmp_path):
    assert cli.main(["report", "--out", str(tmp_path)]) == 2


def test_scaling_needs_three_sizes():
    rows = [dict(rate="linear", L=L, N=1, gap=1 / L ** 2, lsi_estimate="") for L in (2, 3)]
    with pytest.raises(InsufficientDataError):
        cli.emit_scaling_report(rows)


def test_scaling_exact_power_and_constant():
    rows = [dict(rate="r", L=L, N=1, gap=1 / L ** 2, lsi_estimate=5.0) for L in (2, 4, 8, 16)]
    table = cli.emit_scaling_report(rows)["rows"]
    ig = next(r for r in table if r["quantity"] == "inverse_gap" and r["series"] == "pooled")
    assert ig["slope"] == pytest.approx(2.0, abs=1e-12)
    ls = next(r for r in table if r["quantity"] == "lsi_estimate" and r["series"] == "pooled")
    assert ls["slope"] == 0.0


def test_write_atomic_replaces(tmp_path):
    p = tmp_path / "x" / "f.txt"
    cli.write_atomic(p, "a")
    cli.write_atomic(p, "b")
    assert p.read_text() == "b"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]


def test_list_parsing():
    assert cli._parse_list("1..3,7") == [1, 2, 3, 7]
    with pytest.raises(ConfigError):
        cli._coerce("L", "a..b")


def test_format_has_no_negative_zero():
    assert cli._fmt(-0.0) == "0.0"
    assert float(cli._fmt(np.float64(1 / 3))) == 1 / 3
