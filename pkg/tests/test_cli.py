import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from metriplectic.cli import main
from metriplectic.scenario import load_scenario, preset_names
from metriplectic.trajio import read_trajectory

PRESET = "relaxing-rigid-body"

BASE = """
name = "tmp"
initial_state = [0.001, -1.0, 0.001]
step_h = 0.1
n_steps = 50

[system]
kind = "rigid-body"
inertia = [10.0, 5.0, 1.0]
"""


def write(tmp_path, text, name="s.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_preset_matches_figure_parameters():
    scen = load_scenario(PRESET)
    assert scen.inertia == (10.0, 5.0, 1.0)
    assert scen.step_h == 0.1
    np.testing.assert_array_equal(scen.initial_state, [0.001, -1.0, 0.001])
    assert scen.scheme == "midpoint" and scen.n_steps == 2000
    assert {"relaxing-rigid-body", "relaxing-rigid-body-quartic"} <= set(preset_names())


def test_run_and_check(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert main(["run", "--scenario", PRESET, "--out", str(out)]) == 0
    with out.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "t", "x_1", "x_2", "x_3", "H", "S", "dS", "solver_iters", "residual"]
    assert len(rows) == 2002
    capsys.readouterr()
    report = tmp_path / "report.json"
    assert main(["check", "--scenario", PRESET, "--traj", str(out), "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["overall"] == "pass"
    assert {"energy-drift", "entropy-decrease", "entropy-rate", "cross-validation:metric-form"} <= {
        c["name"] for c in doc["checks"]}


def test_csv_round_trip_is_exact(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["run", "--scenario", write(tmp_path, BASE), "--out", str(out)]) == 0
    traj = read_trajectory(out)
    scen = load_scenario(tmp_path / "s.toml")
    from metriplectic import integrate
    ref = integrate(scen.system, scen.config(), scen.initial_state, scen.n_steps)
    np.testing.assert_array_equal(traj.states, ref.states)
    np.testing.assert_array_equal(traj.entropies, ref.entropies)
    assert traj.config.step_h == 0.1


def test_rk4_trajectory_fails_check(tmp_path, capsys):
    out = tmp_path / "rk4.csv"
    assert main(["run", "--scenario", PRESET, "--out", str(out), "--method", "rk4"]) == 0
    capsys.readouterr()
    assert main(["check", "--scenario", PRESET, "--traj", str(out)]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"] == "rk4"
    failed = {c["name"] for c in doc["checks"] if not c["passed"]}
    assert "energy-drift" in failed


def test_check_without_traj(tmp_path, capsys):
    assert main(["check", "--scenario", write(tmp_path, BASE)]) == 0
    assert json.loads(capsys.readouterr().out)["overall"] == "pass"


@pytest.mark.parametrize("text", ["", "   \n", "name = [unclosed", BASE.replace("step_h = 0.1", "step_h = -0.1"),
                                  BASE.replace('kind = "rigid-body"', 'kind = "fluid"'),
                                  BASE.replace("n_steps = 50", 'n_steps = "many"'),
                                  BASE.replace("n_steps = 50", 'n_steps = 50\nscheme = "euler"')])
def test_bad_scenarios_exit_3(tmp_path, text, capsys):
    assert main(["run", "--scenario", write(tmp_path, text), "--out", str(tmp_path / "o.csv")]) == 3
    assert "error" in capsys.readouterr().err


def test_parse_error_has_line(tmp_path, capsys):
    main(["check", "--scenario", write(tmp_path, "name = 'x'\nstep_h = = 3\n")])
    assert "line 2" in capsys.readouterr().err


def test_non_casimir_entropy_rejected(tmp_path, capsys):
    text = BASE + """
[system.entropy]
polynomial = [{coeff = 1.0, powers = [1, 0, 0]}]
"""
    assert main(["check", "--scenario", write(tmp_path, text)]) == 3
    assert "entropy-casimir" in capsys.readouterr().err


def test_missing_file_and_usage(tmp_path):
    assert main(["check", "--scenario", str(tmp_path / "nope.toml")]) == 3
    with pytest.raises(SystemExit) as info:
        main(["run", "--scenario", PRESET])
    assert info.value.code == 3
    with pytest.raises(SystemExit) as info:
        main(["fly"])
    assert info.value.code == 3


def test_bad_trajectory_file(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n1,2,3\n")
    assert main(["check", "--scenario", PRESET, "--traj", str(bad)]) == 3


def test_solver_failure_exit_2(tmp_path, capsys):
    text = BASE.replace("step_h = 0.1", "step_h = 50.0") + "\n[solver]\nmax_iters = 2\n"
    out = tmp_path / "f.csv"
    assert main(["run", "--scenario", write(tmp_path, text), "--out", str(out)]) == 2
    meta = json.loads((tmp_path / "f.csv.meta.json").read_text())
    assert meta["truncated"] is True and meta["error"]
    assert read_trajectory(out).truncated


LIE_POISSON = """
name = "lp"
initial_state = [0.2, -0.8, 0.4]
step_h = 0.05
n_steps = 40
scheme = "mean-value"

[system]
kind = "lie-poisson"
structure_constants = "so3"
hamiltonian = {quadratic = [[0.5, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]}
entropy = {preset = "norm-quartic"}
metric = [[2.0, 0.1, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 0.5]]
"""

EXPLICIT = """
name = "ex"
initial_state = [0.5, -0.3, 0.8]
step_h = 0.05
n_steps = 40
scheme = "midpoint"

[system]
kind = "explicit"
pi = {constant = [[0.0, 0.5, 2.0], [-0.5, 0.0, 1.0], [-2.0, -1.0, 0.0]]}
hamiltonian = {polynomial = [{coeff = 0.25, powers = [4, 0, 0]}, {coeff = 0.5, powers = [0, 2, 0]},
                             {coeff = 1.0, powers = [0, 0, 2]}, {coeff = 0.3, powers = [1, 1, 0]}]}
entropy = {polynomial = [{coeff = 1.0, powers = [2, 0, 0]}, {coeff = -4.0, powers = [1, 1, 0]},
                         {coeff = 4.0, powers = [0, 2, 0]}, {coeff = 1.0, powers = [1, 0, 1]},
                         {coeff = -2.0, powers = [0, 1, 1]}, {coeff = 0.25, powers = [0, 0, 2]}]}
"""


@pytest.mark.parametrize("text", [LIE_POISSON, EXPLICIT], ids=["lie-poisson", "explicit"])
def test_other_system_kinds(tmp_path, text, capsys):
    assert main(["check", "--scenario", write(tmp_path, text)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["overall"] == "pass"


def test_coordinate_increment_run(tmp_path, capsys):
    out = tmp_path / "ia.csv"
    text = EXPLICIT.replace('scheme = "midpoint"', 'scheme = "itoh-abe"')
    assert main(["run", "--scenario", write(tmp_path, text), "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["energy_drift"] <= 1e-12
    assert json.loads((tmp_path / "ia.csv.meta.json").read_text())["scheme"] == "coordinate-increment"


def test_converge(tmp_path, capsys):
    report = tmp_path / "conv.json"
    assert main(["converge", "--scenario", PRESET, "--h-list", "0.2,0.1,0.05", "--t-final", "2",
                 "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert 1.8 <= doc["order"] <= 2.2
    assert main(["converge", "--scenario", PRESET, "--h-list", "0.1,0.1,0.05"]) == 3
    assert main(["converge", "--scenario", PRESET, "--h-list", "0.1,x"]) == 3


def test_sweep(tmp_path, capsys):
    grid = write(tmp_path, 'step_h = [0.2, 0.1]\nscheme = ["midpoint", "mean-value"]\nkd_variant = ["unscaled", "scaled"]\n',
                 "grid.toml")
    csv_out = tmp_path / "sweep.csv"
    assert main(["sweep", "--scenario", write(tmp_path, BASE), "--grid", grid, "--jobs", "3",
                 "--csv", str(csv_out)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["rows"]) == 8
    assert [r["index"] for r in doc["rows"]] == list(range(8))
    assert all(r["passed"] for r in doc["rows"])
    with csv_out.open() as fh:
        assert len(list(csv.DictReader(fh))) == 8


def test_sweep_bad_grid(tmp_path):
    grid = write(tmp_path, 'step_h = []\n', "grid.toml")
    assert main(["sweep", "--scenario", PRESET, "--grid", grid]) == 3
    grid = write(tmp_path, 'scheme = ["nope"]\n', "grid2.toml")
    assert main(["sweep", "--scenario", PRESET, "--grid", grid]) == 3


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "metriplectic", "check", "--scenario", write(tmp_path, BASE)],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
