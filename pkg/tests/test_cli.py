import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from dynfactor.cli import MANIFEST, run


def outputs(d):
    return {f.name: f.read_bytes() for f in sorted(d.iterdir()) if f.name != MANIFEST}


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert run(["simulate", "--dgp", "block_one_factor", "--n", "60", "--T", "120", "--seed", "3", "--out", str(d)]) == 0
    return d


def test_simulate_outputs(sim_dir):
    names = {f.name for f in sim_dir.iterdir()}
    assert {"panel.csv", "true_common.csv", "true_idio.csv", "true_loadings.csv", "config.json", MANIFEST} <= names
    manifest = json.loads((sim_dir / MANIFEST).read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 3
    assert manifest["params"]["dgp"] == "block_one_factor"
    assert "duration_seconds" in manifest and manifest["version"]
    assert sum(f.name == MANIFEST for f in sim_dir.iterdir()) == 1


def test_twelve_significant_digits(sim_dir):
    with open(sim_dir / "panel.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "time" and len(rows) == 121
    digits = max(len(c.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) for c in rows[1][1:])
    assert digits <= 12


def test_manifest_reproduces(sim_dir, tmp_path):
    first = tmp_path / "a"
    assert run(["nfactors", "--input", str(sim_dir / "panel.csv"), "--method", "tuned-static",
                "--perms", "5", "--k-max", "4", "--out", str(first)]) == 0
    second = tmp_path / "b"
    assert run(["--config", str(first / MANIFEST), "--out", str(second)]) == 0
    assert outputs(first) == outputs(second)
    again = tmp_path / "c"
    assert run(["--config", str(sim_dir / MANIFEST), "--out", str(again)]) == 0
    assert outputs(sim_dir) == outputs(again)


def test_config_file(sim_dir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "nfactors", "input": str(sim_dir / "panel.csv"), "method": "ic"}))
    assert run(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "selection.json").read_text())["count"] == 1


@pytest.mark.parametrize("method", ["ratio", "ic", "tuned-static"])
def test_nfactors_one_factor(sim_dir, tmp_path, method):
    assert run(["nfactors", "--input", str(sim_dir / "panel.csv"), "--method", method, "--k-max", "5",
                "--perms", "5", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "selection.json").read_text())["count"] == 1


def test_nfactors_white_noise_dynamic(tmp_path):
    assert run(["simulate", "--dgp", "white_noise", "--n", "40", "--T", "400", "--out", str(tmp_path / "s")]) == 0
    assert run(["nfactors", "--input", str(tmp_path / "s" / "panel.csv"), "--method", "hl-dynamic", "--k-max", "4",
                "--perms", "5", "--out", str(tmp_path / "o")]) == 0
    sel = json.loads((tmp_path / "o" / "selection.json").read_text())
    assert sel["count"] == 0 and (tmp_path / "o" / "ic_surface.csv").exists()


def test_eigtraj_orders(sim_dir, tmp_path):
    loadings = str(sim_dir / "true_loadings.csv")
    for order in ("inc", "dec", "alt"):
        assert run(["eigtraj", "--population", "--loadings", loadings, "--order", order, "--j-max", "1",
                    "--out", str(tmp_path / order)]) == 0
    fits = json.loads((tmp_path / "alt" / "fits.json").read_text())
    assert fits["1"]["r2"] >= 0.999
    with open(tmp_path / "inc" / "trajectory.csv") as fh:
        rows = list(csv.DictReader(fh))
    vals = np.array([float(r["value"]) for r in rows])
    assert np.all(np.diff(vals, 2) >= -1e-9)


def test_eigtraj_dynamic(sim_dir, tmp_path):
    assert run(["eigtraj", "--input", str(sim_dir / "panel.csv"), "--mode", "dynamic", "--perms", "3",
                "--j-max", "2", "--grid", "10,20,40,60", "--threads", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "dynamic_eigenvalues.csv").exists()
    with open(tmp_path / "trajectory.csv") as fh:
        assert next(csv.reader(fh)) == ["permutation_id", "j", "m", "value"]


def test_decompose(sim_dir, tmp_path):
    assert run(["decompose", "--input", str(sim_dir / "panel.csv"), "--r", "1", "--q", "1", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "orthogonality.json").read_text())
    assert rep["pairs"]["stat_common~stat_idio"]["lag0"] <= 1e-8
    for name in ("stat_common.csv", "weak_common.csv", "dyn_idio.csv", "filters.csv"):
        assert (tmp_path / name).exists()


def test_forecast_oracle(tmp_path):
    assert run(["forecast", "--dgp", "dynamic_loading", "--n", "30", "--T", "300", "--mode", "oracle_dyn",
                "--mode", "oracle_stat", "--window", "280", "--step", "5", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["mse"]) == {"oracle_dyn", "oracle_stat"}


def test_forecast_single_origin(sim_dir, tmp_path):
    assert run(["forecast", "--input", str(sim_dir / "panel.csv"), "--mode", "stat", "--window", "119",
                "--p-lags", "1", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "forecasts.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    r = rows[0]
    assert float(r["sq_error"]) == pytest.approx((float(r["realized"]) - float(r["prediction"])) ** 2, rel=1e-9)


@pytest.mark.parametrize(
    "argv,code",
    [
        (["decompose", "--input", "missing.csv", "--r", "1", "--q", "1"], "io_error"),
        (["decompose", "--input", "{panel}", "--r", "0", "--q", "1"], "dimension_error"),
        (["nfactors", "--input", "{panel}", "--method", "ic", "--k-max", "100"], "dimension_error"),
        (["nfactors", "--input", "{panel}", "--method", "tuned-static", "--m-grid", "2,3"], "grid_error"),
        (["simulate", "--dgp", "block_one_factor", "--n", "31"], "dimension_error"),
        (["simulate", "--dgp", "garch"], "usage_error"),
        (["eigtraj", "--order", "inc"], "usage_error"),
    ],
)
def test_errors_are_json(sim_dir, tmp_path, capsys, argv, code):
    argv = [a.replace("{panel}", str(sim_dir / "panel.csv")) for a in argv] + ["--out", str(tmp_path / "x")]
    assert run(argv) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == code and err["message"]


def test_ingest_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("time,a,b\n1,1,2\n2,3\n3,4,5\n")
    assert run(["ingest", "--input", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ingest_error"


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dynfactor.cli", "simulate", "--dgp", "white_noise", "--n", "3",
                           "--T", "10", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "dynfactor.cli"], capture_output=True, text=True)
    assert proc.returncode == 2 and json.loads(proc.stderr)["error"] == "usage_error"
