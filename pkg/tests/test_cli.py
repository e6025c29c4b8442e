from __future__ import annotations

import csv
import subprocess
import sys

import numpy as np
import pytest
import yaml

from hotrack.cli import (
    EXIT_DIVERGED,
    EXIT_INVALID,
    EXIT_OK,
    EXIT_UNCERTIFIED,
    OUT_ENV,
    main,
    parse_grid,
)
from hotrack.scenario_io import bundled_scenario_path, load_scenario
from hotrack.sim import StateLayout
from hotrack.stability import certify


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_variant(tmp_path, name="s.yaml", **gains):
    doc = yaml.safe_load(bundled_scenario_path("reference_nonlinear").read_text())
    doc["gains"].update(gains)
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


def test_simulate_equilibrium(tmp_path, capsys):
    assert main(["simulate", "equilibrium", "--out", str(tmp_path)]) == EXIT_OK
    for name in ("trace.csv", "errors.csv", "summary.txt"):
        assert (tmp_path / name).is_file()
    header, rows = read_csv(tmp_path / "errors.csv")
    assert header == ["t", "e_u", "e_0x", "e_x", "e"]
    values = np.array(rows, dtype=float)
    assert np.all(values[:, 1:] == 0)
    assert values[-1, 0] == pytest.approx(5.0)
    assert "final" in capsys.readouterr().out


def test_trace_columns(tmp_path):
    assert main(["simulate", "reference_nonlinear", "--horizon", "0.05", "--out", str(tmp_path)]) == EXIT_OK
    header, rows = read_csv(tmp_path / "trace.csv")
    assert header[0] == "t" and len(rows) == 51
    for col in ("x_0_1", "x_5_3", "x0hat_1_2", "xhat_1_2", "u0hat_1", "d_5", "u0", "u_1"):
        assert col in header
    assert len(set(header)) == len(header)
    assert all(len(r) == len(header) for r in rows)


def test_simulate_overrides_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["simulate", "reference_nonlinear", "--horizon", "0.1", "--dt", "0.01"]) == EXIT_OK
    _, rows = read_csv(tmp_path / "env" / "errors.csv")
    assert len(rows) == 11


def test_simulate_divergence(tmp_path):
    path = write_variant(tmp_path, k=[100, 1, 1])
    assert main(["simulate", str(path), "--out", str(tmp_path / "o")]) == EXIT_DIVERGED
    assert "diverged" in (tmp_path / "o" / "summary.txt").read_text()


@pytest.mark.parametrize("name,code", [("reference_nonlinear", EXIT_UNCERTIFIED),
                                       ("reference_linear", EXIT_UNCERTIFIED),
                                       ("reference_linear_limit", EXIT_OK)])
def test_certify_exit_codes(name, code, capsys):
    assert main(["certify", name]) == code
    assert "certificate" in capsys.readouterr().out


def test_certify_kv_format(capsys):
    main(["certify", "reference_linear_limit", "--format", "kv"])
    out = capsys.readouterr().out
    assert "passed=true" in out.lower().replace(" ", "")


def test_invalid_inputs_exit_two(tmp_path, capsys):
    bad = write_variant(tmp_path, k=[3, 3])
    assert main(["certify", str(bad)]) == EXIT_INVALID
    assert "gains.k" in capsys.readouterr().err
    (tmp_path / "broken.yaml").write_text("system: [\n")
    assert main(["certify", str(tmp_path / "broken.yaml")]) == EXIT_INVALID
    assert main(["certify", str(tmp_path / "missing.yaml")]) == EXIT_INVALID
    assert main(["simulate", "reference_nonlinear", "--dt", "-1", "--out", str(tmp_path)]) == EXIT_INVALID


def test_sweep_grid(tmp_path):
    code = main(["sweep", "reference_nonlinear", "--grid", "k1=1:3:3", "--grid", "c0_2=4,5,6",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    header, rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 9
    assert header[:3] == ["k1", "c0_2", "certified"]
    assert sorted({r[0] for r in rows}) == ["1.0", "2.0", "3.0"]


def test_sweep_row_matches_certify(tmp_path):
    main(["sweep", "reference_nonlinear", "--grid", "k1=3", "--out", str(tmp_path)])
    header, rows = read_csv(tmp_path / "sweep.csv")
    report = certify(load_scenario(bundled_scenario_path("reference_nonlinear")))
    row = dict(zip(header, rows[0]))
    assert row["certified"] == str(report.passed)
    for clause in report.clauses:
        assert row[clause.name] == clause.status


def test_sweep_with_simulation(tmp_path):
    main(["sweep", "reference_nonlinear", "--grid", "k1=3,100", "--grid", "k2=1", "--grid", "k3=1",
          "--sim-horizon", "8", "--out", str(tmp_path)])
    header, rows = read_csv(tmp_path / "sweep.csv")
    by_k1 = {r[0]: dict(zip(header, r)) for r in rows}
    assert by_k1["100.0"]["diverged"] == "True" and by_k1["100.0"]["final_e"] == "nan"
    assert by_k1["100.0"]["certified"] == "False"


@pytest.mark.parametrize("specs", [[], ["k9=1"], ["k1=1:2"], ["k1="], ["k1=1", "k1=2"], ["zz=1"]])
def test_bad_grids(specs):
    with pytest.raises(ValueError):
        parse_grid(specs, 3)


def test_empty_grid_exits_two(tmp_path):
    assert main(["sweep", "reference_nonlinear", "--out", str(tmp_path)]) == EXIT_INVALID
    assert not (tmp_path / "sweep.csv").exists()


def test_console_script_runs():
    out = subprocess.run([sys.executable, "-m", "hotrack.cli", "certify", "reference_linear_limit"],
                         capture_output=True, text=True)
    assert out.returncode == EXIT_OK, out.stderr


def test_trace_includes_every_state_group():
    labels = StateLayout(5, 3, True).labels()
    assert any(s.startswith("z0_") for s in labels) and any(s.startswith("z_") for s in labels)
