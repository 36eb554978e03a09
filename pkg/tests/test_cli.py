import csv
import io
import json
import subprocess
import sys

import pytest

from occtime import cli, series
from occtime.quadrature import QuadratureError, QuadratureResult

from _shared import series_fast

MC_ARGS = ["mc", "--trajectories", "10000", "--steps", "100", "--seed", "7"]


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def cached_series(monkeypatch):
    monkeypatch.setattr(series, "compute_series", lambda tier="fast", progress=None: series_fast())


def test_moments_rows(cached_series, capsys):
    assert cli.main(["moments", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    rows = _rows(out)
    assert tuple(rows[0]) == cli.COLUMNS
    raw = {r["n"]: r for r in rows if r["name"] == "raw_moment"}
    assert raw["1"]["value"] == "0.5" and raw["1"]["err"] == "exact"
    assert raw["1"]["provenance"] == "closed_form"
    assert round(float(raw["2"]["value"]), 9) == 0.413496672
    assert float(raw["2"]["err"]) < 1e-8 and raw["2"]["provenance"] == "quadrature"
    central = {r["n"]: r for r in rows if r["name"] == "central_moment"}
    assert round(float(central["4"]["value"]), 9) == 0.034842117
    coeff5 = [r for r in rows if r["name"] == "series_coefficient" and r["n"] == "5"][0]
    assert coeff5["provenance"] == "mixed"
    assert all(r["paper_anchor"] for r in rows)


def test_moments_json_and_out(cached_series, tmp_path):
    path = tmp_path / "m.json"
    assert cli.main(["moments", "--format", "json", "--out", str(path)]) == 0
    data = json.loads(path.read_text())
    assert data["exit_code"] == 0
    assert any(r["name"] == "epsilon" for r in data["rows"])


def test_epsilon_nonconvergence_exit(monkeypatch, capsys):
    bad = QuadratureResult(0.00087, 1e-5, 10, False, 1)
    monkeypatch.setattr(series, "epsilon_constant", lambda rel_tol: bad)
    assert cli.main(["epsilon", "--format", "csv"]) == cli.EXIT_NONCONV
    rows = _rows(capsys.readouterr().out)
    assert rows[0]["name"] == "epsilon"


def test_epsilon_report(monkeypatch, capsys):
    monkeypatch.setattr(series, "epsilon_constant", lambda rel_tol: series_fast().eps)
    assert cli.main(["epsilon"]) == 0
    out = capsys.readouterr().out
    assert "epsilon_positive" in out and "pass" in out


def test_quadrature_error_exit(monkeypatch):
    def boom(rel_tol):
        raise QuadratureError("non-finite integrand value", abscissa=1.0)

    monkeypatch.setattr(series, "epsilon_constant", boom)
    assert cli.main(["epsilon"]) == cli.EXIT_NONCONV


def test_validate_kernel(capsys):
    assert cli.main(["validate", "--suite", "kernel", "--format", "csv"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert "status" in rows[0]
    assert all(r["status"] == "pass" for r in rows)


def test_validate_basis_contains_identity_point(capsys):
    assert cli.main(["validate", "--suite", "basis", "--format", "csv"]) == 0
    rows = _rows(capsys.readouterr().out)
    hit = [r for r in rows if r["name"] == "identity_one_over_s" and r["n"] == "s=2.0 v=1.3"]
    assert float(hit[0]["value"]) == pytest.approx(0.5, abs=1e-8)
    assert len([r for r in rows if r["name"] == "identity_one_over_s"]) == 10


def test_mc_report(capsys):
    assert cli.main(MC_ARGS + ["--format", "csv"]) == 0
    rows = _rows(capsys.readouterr().out)
    names = {r["name"] for r in rows}
    assert {"tplus_raw", "tplus_central", "tmax_raw", "tplus_raw_z", "tmax_raw_z"} <= names
    assert all(r["status"] in ("", "pass") for r in rows)


def test_mc_byte_identical_across_workers(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cmd = MC_ARGS + ["--trajectories", "20000", "--format", "csv"]
    assert cli.main(cmd + ["--workers", "1", "--out", str(a)]) == 0
    assert cli.main(cmd + ["--workers", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_mc_offset_start_skips_pinned_checks(capsys):
    assert cli.main(MC_ARGS + ["--x0", "0.5", "--orders", "1,2", "--format", "csv"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert {r["name"] for r in rows} == {"tplus_raw", "tplus_central"}


def test_compare_with_histogram(tmp_path, capsys):
    hist = tmp_path / "h.csv"
    code = cli.main(["compare", "--trajectories", "20000", "--steps", "200", "--hist", str(hist),
                     "--format", "csv"])
    rows = _rows(capsys.readouterr().out)
    assert code == 0
    assert len([r for r in rows if r["name"] == "ordering_tplus_below_tmax"]) == 4
    h = _rows(hist.read_text())
    assert len(h) == 50
    assert sum(int(r["tplus_count"]) for r in h) == 20000


@pytest.mark.parametrize("argv", [
    ["mc", "--steps", "50"],
    ["mc", "--trajectories", "0"],
    ["mc", "--seed", "-3"],
    ["mc", "--orders", "7"],
    ["mc", "--workers", "x"],
    ["moments", "--tier", "turbo"],
    ["frobnicate"],
    [],
])
def test_bad_config_exit_code(argv, capsys):
    try:
        code = cli.main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == cli.EXIT_CONFIG


def test_unwritable_output(tmp_path):
    assert cli.main(MC_ARGS + ["--out", str(tmp_path / "missing" / "x.csv")]) == cli.EXIT_CONFIG


def test_orders_parser():
    assert cli._orders("1..3") == [1, 2, 3]
    assert cli._orders("2,4") == [2, 4]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "occtime", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("occtime")
