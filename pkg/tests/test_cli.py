import csv
import json
import shutil
import subprocess
import sys

import pytest

from kolmo_lab import cli


def write_cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_shipped_defaults_match():
    assert json.loads(cli.default_config_path().read_text()) == cli.DEFAULTS


def test_malformed_config_names_key(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"harnack": {"omega": "wide"}})
    assert cli.run(["harnack", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "harnack/omega" in capsys.readouterr().err
    cfg = write_cfg(tmp_path, {"price": {"strikee": 1.0}})
    assert cli.run(["price", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "price" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{seed: 1")
    assert cli.run(["geometry", "--config", str(bad)]) == 1


def test_bad_sweep_and_subcommand_mismatch(tmp_path):
    assert cli.run(["harnack", "--sweep", "omega=0.5:0.1:0.1", "--out", str(tmp_path)]) == 1
    assert cli.run(["geometry", "--sweep", "omega=0.1:0.2:0.1", "--out", str(tmp_path)]) == 1
    cfg = write_cfg(tmp_path, {"subcommand": "price"})
    assert cli.run(["geometry", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_seed_printed_first(tmp_path, capsys):
    assert cli.run(["geometry", "--seed", "17", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "seed: 17"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 17 and man["exit_code"] == 0
    assert set(man["artifacts"]) == {"geometry.json", "covariance.csv"}


def test_numerical_failure_exit_2(tmp_path):
    cfg = write_cfg(tmp_path, {"fundsol": {"points": [[0.0, 0.0, 1e-14]]}})
    assert cli.run(["fundsol", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["kind"] == "NumericalError"
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["exit_code"] == 2


def test_harnack_sweep_rows(tmp_path):
    cfg = write_cfg(tmp_path, {"resolution": [32, 64], "harnack": {"rho": 0.05}})
    out = tmp_path / "h"
    assert cli.run(["harnack", "--config", cfg, "--sweep", "omega=0.1:0.5:0.05",
                    "--out", str(out)]) == 0
    rows = read_csv(out / "harnack.csv")
    assert len(rows) == 9
    assert [float(r["omega"]) for r in rows] == pytest.approx([0.1 + 0.05 * i for i in range(9)])
    assert all(r["status"] == "ok" and float(r["fitted_constant"]) > 0 for r in rows)
    # rho >= omega / sqrt(2) is reported per row, not raised
    cfg = write_cfg(tmp_path, {"resolution": [32, 64]}, "c2.json")
    assert cli.run(["harnack", "--config", cfg, "--sweep", "omega=0.1:0.5:0.05",
                    "--out", str(out)]) == 0
    status = [r["status"] for r in read_csv(out / "harnack.csv")]
    assert status == ["inadmissible"] * 7 + ["ok"] * 2


def test_outputs_byte_identical(tmp_path):
    args = ["geometry", "--seed", "3"]
    assert cli.run(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.run(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("geometry.json", "covariance.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_threads_env(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path, {"simulate": {"n_paths": 2000, "dt": 0.01, "record_every": 10,
                                            "kde": False}})
    outs = []
    for t in ("1", "3"):
        monkeypatch.setenv("KOLMO_LAB_THREADS", t)
        out = tmp_path / f"s{t}"
        assert cli.run(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert json.loads((out / "manifest.json").read_text())["threads"] == int(t)
        outs.append((out / "moments.csv").read_bytes())
    assert outs[0] == outs[1]
    monkeypatch.setenv("KOLMO_LAB_THREADS", "many")
    assert cli.run(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == 1


def test_tail_subcommand(tmp_path):
    assert cli.run(["tail", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "tail.json").read_text())
    assert abs(res["tail"] - 1) < 1e-6 and res["tail_sup"] >= res["tail"]


@pytest.mark.skipif(shutil.which("kolmo-lab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    r = subprocess.run(["kolmo-lab", "geometry", "--out", str(tmp_path)], capture_output=True,
                       text=True)
    assert r.returncode == 0 and r.stdout.startswith("seed: 0")
    r = subprocess.run([sys.executable, "-m", "kolmo_lab.cli", "nope"], capture_output=True)
    assert r.returncode == 2  # argparse usage error
