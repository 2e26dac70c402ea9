import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tfim_entanglement import cli
from tfim_entanglement.free_fermion import CorrelatorSet


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_sweep_csv_layout(tmp_path):
    out = tmp_path / "s.csv"
    code = cli.main(["sweep", "--sizes", "20,0,10", "--lambda-min", "0.5", "--lambda-max", "1.0",
                     "--steps", "3", "--out", str(out)])
    assert code == 0
    raw = out.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rows = _rows(out)
    assert rows[0] == ["N", "lambda", "Ev", "dEv_dlambda", "concurrence", "dC_dlambda"]
    keys = [(int(r[0]), float(r[1])) for r in rows[1:]]
    assert keys == sorted(keys) and len(keys) == 9
    assert keys[0] == (0, 0.5)
    thermo_crit = rows[3]
    assert thermo_crit[:2] == ["0", "1"]
    assert thermo_crit[3] == "inf" and thermo_crit[5] == "-inf"
    # round-trip precision
    assert all(float(repr(float(x))) == float(x) for x in rows[1][1:])
    manifest = json.loads((tmp_path / "s.manifest.json").read_text())
    assert manifest["command"] == "sweep" and manifest["checks"]["rows"] == 9
    assert manifest["config"]["sizes"] == [20, "THERMODYNAMIC", 10]


def test_sweep_json(tmp_path):
    out = tmp_path / "s.json"
    assert cli.main(["sweep", "--sizes", "12", "--lambda-min", "0.2", "--lambda-max", "0.4",
                     "--steps", "2", "--format", "json", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["columns"][0] == "N"
    assert data["data"]["lambda"] == [0.2, 0.4]


def test_sweep_mode_subset(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--sizes", "12", "--lambda-min", "0.2", "--lambda-max", "0.4",
                     "--steps", "2", "--mode", "entropy", "--out", str(out)]) == 0
    row = _rows(out)[1]
    assert row[2] != "nan" and row[3] == "nan" and row[4] == "nan"


@pytest.mark.parametrize("argv", [
    ["sweep", "--sizes", "8", "--lambda-min", "0", "--lambda-max", "0", "--steps", "2"],
    ["sweep", "--sizes", "2"],
    ["sweep", "--sizes", "8", "--steps", "1"],
    ["sweep", "--sizes", "8", "--lambda-min", "-1"],
    ["sweep", "--bogus"],
    ["nosuchcommand"],
])
def test_sweep_invalid_arguments(argv, tmp_path):
    out = tmp_path / "bad.csv"
    assert cli.main(argv + ["--out", str(out)]) == 1
    assert not out.exists()


def test_sweep_byte_determinism_across_workers(tmp_path):
    base = ["sweep", "--sizes", "41,101,0", "--lambda-min", "0.6", "--lambda-max", "1.4",
            "--steps", "17"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(base + ["--workers", "1", "--out", str(a)]) == 0
    assert cli.main(base + ["--workers", "8", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_workers_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "2")
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--sizes", "10", "--steps", "3", "--out", str(out)]) == 0
    assert json.loads((tmp_path / "s.manifest.json").read_text())["config"]["workers"] == 2
    monkeypatch.setenv(cli.WORKERS_ENV, "many")
    assert cli.main(["sweep", "--sizes", "10", "--steps", "3", "--out", str(out)]) == 1


def test_failed_sweep_leaves_no_file(tmp_path, monkeypatch):
    def broken(point, size=None):
        raise cli.QuadratureError("injected")
    monkeypatch.setattr(cli.corr, "correlators", broken)
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--sizes", "10", "--steps", "3", "--out", str(out)]) == 2
    assert list(tmp_path.iterdir()) == []


def test_config_file_defaults_and_override(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"sizes": "9", "steps": 4, "lambda_min": 0.1}))
    out = tmp_path / "s.csv"
    assert cli.main(["--config", str(conf), "sweep", "--steps", "2", "--out", str(out)]) == 0
    rows = _rows(out)[1:]
    assert [r[0] for r in rows] == ["9", "9"]
    assert float(rows[0][1]) == 0.1
    conf.write_text(json.dumps({"no_such_flag": 1}))
    assert cli.main(["--config", str(conf), "sweep", "--out", str(out)]) == 1


def test_stdout_output_and_manifest_on_stderr(capsys):
    assert cli.main(["sweep", "--sizes", "10", "--steps", "2"]) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("N,lambda,Ev,")
    assert json.loads(captured.err)["command"] == "sweep"


def test_scaling_small_run(tmp_path):
    out = tmp_path / "r.json"
    code = cli.main(["scaling", "--sizes", "50,100,200,400", "--log-sizes", "1000,2000,4000,8000",
                     "--thermo-exponents", "2,2.5,3,3.5", "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    for key in ("a1_constant", "lambda_m", "drift_fit", "critical_samples", "a1_fit_lambda_c",
                "a1_fit_lambda_m", "a2_fit_below", "a2_fit_above", "checks"):
        assert key in rep
    assert rep["drift_fit"]["exponent"] < 0 and 0 < rep["drift_fit"]["r_squared"] <= 1
    assert rep["a1_fit_lambda_c"]["amplitude"] == pytest.approx(rep["a1_constant"], rel=0.02)
    assert all(r["lambda_m"] < 1 for r in rep["lambda_m"])
    assert (tmp_path / "r.manifest.json").exists()


def test_scaling_too_few_points_is_numerical_failure(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["scaling", "--sizes", "50,100,200", "--log-sizes", "1000,2000,4000,8000",
                     "--thermo-exponents", "2,3,4,5", "--out", str(out)]) == 2
    assert not out.exists()


def test_scaling_rejects_thermodynamic_size():
    assert cli.main(["scaling", "--sizes", "50,inf,200,400"]) == 1


def _write_fixture(path, nu=0.95, sizes=(41, 101, 251, 401), center=0.99):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "lambda", "dEv_dlambda", "lambda_m"])
        for n in sizes:
            lam = center + np.linspace(-2.0, 2.0, 41) / n
            lam[20] = center
            x = n ** (1 / nu) * (lam - center)
            for l, y in zip(lam, np.log1p(x * x)):
                w.writerow([n, repr(float(l)), repr(float(y)), repr(center)])


def test_collapse_fixture_recovers_nu(tmp_path):
    fx = tmp_path / "fixture.csv"
    _write_fixture(fx)
    out = tmp_path / "c.json"
    assert cli.main(["collapse", "--input", str(fx), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["nu"] == pytest.approx(0.95, abs=0.01)
    assert rep["interior_minimum"] is True
    curves = _rows(tmp_path / "c.curves.csv")
    assert curves[0] == ["N", "x", "y"] and len(curves) == 1 + 4 * 41


def test_collapse_two_sizes_rejected(tmp_path):
    fx = tmp_path / "fixture.csv"
    _write_fixture(fx, sizes=(41, 101))
    assert cli.main(["collapse", "--input", str(fx)]) == 1
    assert cli.main(["collapse", "--sizes", "41,101"]) == 1


def test_collapse_tfim(tmp_path):
    out = tmp_path / "c.json"
    assert cli.main(["collapse", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert 0.93 <= rep["nu"] <= 1.03 and rep["interior_minimum"]
    assert set(rep["centers"]) == {"41", "101", "251", "401", "801"}


def test_oracle_check_passes(tmp_path):
    out = tmp_path / "o.json"
    assert cli.main(["oracle-check", "--max-n", "12", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and rep["max_abs_diff"] < 1e-10
    assert {r["quantity"] for r in rep["comparisons"]} >= {"ground_energy", "sz", "entropy"}
    assert rep["momentum_sum_vs_chain_rule"][0]["n"] == 1000


def test_oracle_check_detects_fault(monkeypatch, capsys):
    real = cli.corr.correlators

    def perturbed(point, size=None):
        c = real(point, size)
        return CorrelatorSet.from_sums(c.sz, c.xx + 1e-7, c.yy)

    monkeypatch.setattr(cli.corr, "correlators", perturbed)
    assert cli.main(["oracle-check", "--max-n", "6", "--out", "-"]) == 3
    err = capsys.readouterr().err
    assert "oracle mismatch: xx" in err


@pytest.mark.parametrize("max_n", ["2", "15"])
def test_oracle_check_bounds(max_n):
    assert cli.main(["oracle-check", "--max-n", max_n]) == 1


def test_constants(tmp_path):
    out = tmp_path / "k.json"
    assert cli.main(["constants", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert math.fsum(rep[f"eps{i}"] for i in range(1, 5)) == pytest.approx(1.0, abs=1e-14)
    assert rep["concurrence_log_constant"] == pytest.approx(0.270190, abs=1e-6)
    assert rep["a1_constant"] == pytest.approx(0.351466, abs=1e-6)


def test_plot_outputs(tmp_path):
    pytest.importorskip("matplotlib")
    figs = tmp_path / "figs"
    assert cli.main(["sweep", "--sizes", "20,40", "--steps", "5", "--out", str(tmp_path / "s.csv"),
                     "--plot", str(figs)]) == 0
    names = sorted(p.name for p in figs.iterdir())
    assert "sweep_entropy.png" in names and "sweep_entropy_derivative.png" in names
    assert cli.main(["collapse", "--sizes", "41,101,251", "--out", str(tmp_path / "c.json"),
                     "--plot", str(figs)]) == 0
    assert (figs / "collapse.png").stat().st_size > 0


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "tfim_entanglement.cli", "constants"],
                       capture_output=True, text=True, check=False)
    assert r.returncode == 0
    assert "a1_constant" in r.stdout
