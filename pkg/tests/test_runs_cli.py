import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from hcpspectra import runs
from hcpspectra.model import energy_to_au

CFG = """
# reference impulse run, coarse grid
n0 = 50
dp = 0.05
mode = impulse
shells = 10meV
theta_min_deg = 5
theta_max_deg = 175
theta_count = 18
outputs = classical,primitive,uniform
"""


def test_parse_config_round_trip():
    cfg = runs.parse_config(CFG)
    assert cfg.n0 == 50
    assert cfg.shells == (energy_to_au(10.0),)
    text = runs.config_to_text(cfg)
    cfg2 = runs.parse_config(text)
    assert cfg2 == cfg
    # canonical form is stable under a second round trip
    assert runs.config_to_text(cfg2) == text


def test_parse_energy_suffixes():
    assert runs.parse_energy("10meV") == pytest.approx(energy_to_au(10.0))
    assert runs.parse_energy(" 2.5e-4 au ") == pytest.approx(2.5e-4)
    with pytest.raises(runs.ConfigError):
        runs.parse_energy("10")
    with pytest.raises(runs.ConfigError):
        runs.parse_energy("10eV")


def test_config_validation():
    with pytest.raises(runs.ConfigError):
        runs.parse_config("mode = banana")
    with pytest.raises(runs.ConfigError):
        runs.parse_config("outputs = quantum\nn0 = 50")  # oracle needs n0 <= 12
    with pytest.raises(runs.ConfigError):
        runs.parse_config("nonsense_key = 3")
    with pytest.raises(runs.ConfigError):
        runs.parse_config("theta_count = 0")


def test_spectrum_rows_summary():
    cfg = runs.parse_config(CFG)
    rows, summary = runs.spectrum_rows(cfg, cfg.shells[0])
    assert len(rows) == 18
    assert summary["chi"] == pytest.approx(6.25)
    assert summary["critical_energy_meV"] == pytest.approx(28.6, abs=0.1)
    assert summary["catastrophes"]["glory_at_zero"]
    assert summary["catastrophes"]["glory_at_pi"]
    assert all(r[5] == 3 for r in rows)  # branch counts


def test_empty_shell_rows():
    cfg = runs.parse_config(CFG)
    rows, summary = runs.spectrum_rows(cfg, 100.0)
    assert len(rows) == 18
    assert all(r[1] == 0.0 and r[3] == 0.0 and r[5] == 0 for r in rows)


def test_shell_curve_rows():
    cfg = runs.parse_config(CFG)
    rows = runs.shell_curve_rows(cfg, cfg.shells[0], n_samples=50)
    assert rows
    branches = {r[2] for r in rows}
    assert branches == {-1, 1}
    r_max = max(r[0] for r in rows)
    assert r_max == pytest.approx(3411.0, abs=2.0)


def _run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "hcpspectra.cli", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
    )


@pytest.fixture()
def cfg_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(CFG)
    return p


def test_cli_spectrum_deterministic(tmp_path, cfg_file):
    for sub, workers in (("a", None), ("b", None), ("c", "4")):
        args = ["--config", str(cfg_file), "--out-dir", str(tmp_path / sub)]
        if workers:
            args += ["--set", f"workers={workers}"]
        res = _run_cli(args + ["spectrum"], tmp_path)
        assert res.returncode == 0, res.stderr
    a = (tmp_path / "a" / "spectrum_10meV.csv").read_bytes()
    b = (tmp_path / "b" / "spectrum_10meV.csv").read_bytes()
    c = (tmp_path / "c" / "spectrum_10meV.csv").read_bytes()
    assert a == b == c  # byte-identical across reruns and worker counts
    with open(tmp_path / "a" / "spectrum_10meV.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        assert header == runs.SPECTRUM_COLUMNS
        n_rows = sum(1 for _ in reader)
    assert n_rows == 18
    summary = json.loads((tmp_path / "a" / "spectrum_10meV.json").read_text())
    assert summary["chi"] == pytest.approx(6.25)


def test_cli_config_error_exit_code(tmp_path):
    res = _run_cli(["--set", "mode=banana", "spectrum"], tmp_path)
    assert res.returncode == 2
    res = _run_cli(["--set", "shells=10", "spectrum"], tmp_path)
    assert res.returncode == 2


def test_cli_empty_shell_csv(tmp_path, cfg_file):
    res = _run_cli(
        ["--config", str(cfg_file), "--set", "shells=100au",
         "--out-dir", str(tmp_path / "empty"), "spectrum"],
        tmp_path,
    )
    assert res.returncode == 0, res.stderr
    files = list((tmp_path / "empty").glob("spectrum_*.csv"))
    assert len(files) == 1
    with open(files[0], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == runs.SPECTRUM_COLUMNS
    assert all(r[5] == "0" for r in rows[1:])


def test_cli_scale_round_trip(tmp_path, cfg_file):
    res = _run_cli(["--config", str(cfg_file), "scale", "--gamma", "5"], tmp_path)
    assert res.returncode == 0, res.stderr
    cfg2 = runs.parse_config(res.stdout)
    assert cfg2.n0 == 10
    assert cfg2.dp == pytest.approx(0.25)
    assert cfg2.shells[0] == pytest.approx(25 * energy_to_au(10.0))


def test_cli_shell_curve(tmp_path, cfg_file):
    res = _run_cli(
        ["--config", str(cfg_file), "--out-dir", str(tmp_path / "sc"), "shell-curve"],
        tmp_path,
    )
    assert res.returncode == 0, res.stderr
    files = list((tmp_path / "sc").glob("shell_curve_*.csv"))
    assert len(files) == 1
    with open(files[0], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == runs.SHELL_CURVE_COLUMNS
    assert len(rows) > 100


def test_cli_catastrophes(tmp_path, cfg_file):
    res = _run_cli(
        ["--config", str(cfg_file), "--out-dir", str(tmp_path / "cat"), "catastrophes"],
        tmp_path,
    )
    assert res.returncode == 0, res.stderr
    report = json.loads((tmp_path / "cat" / "catastrophes.json").read_text())
    assert report["10meV"]["glory_at_pi"] is True
    assert report["10meV"]["rainbows"] == []


def test_scale_config_function():
    cfg = runs.parse_config(CFG)
    scaled = runs.scale_config(cfg, 5.0)
    assert scaled.n0 == 10 and scaled.dp == pytest.approx(0.25)
    with pytest.raises(ValueError):
        runs.scale_config(cfg, 3.0)  # lands between integer n0
