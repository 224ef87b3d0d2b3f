import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wfdelay import cli
from wfdelay import errors as E
from wfdelay.construction import SolutionPair
from wfdelay.initialdata import InitialData

from conftest import straight_line

SCHILD = {"m1": 1.0, "m2": 1.0, "e1": 1.0, "e2": -1.0, "r1": 1.0}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [list(map(float, l.split(","))) for l in lines[1:]]


def test_schild_subcommand(tmp_path):
    args = ["schild", "--out-dir", str(tmp_path)] + [f"--{k}={v}" for k, v in SCHILD.items()]
    assert cli.main(args) == 0
    header, rows = read_csv(tmp_path / "trajectory.csv")
    assert header[:4] == ["t", "q1x", "q1y", "q1z"] and len(header) == 13
    assert len(rows) == 301
    _, res = read_csv(tmp_path / "residual.csv")
    assert max(max(r[1:]) for r in res) <= 1e-9
    params = json.loads((tmp_path / "params.json").read_text())
    assert 0 < params["omega"] * params["delta_t"] < np.pi / 2


def test_run_is_byte_deterministic(tmp_path):
    sc = write(tmp_path / "s.json", dict(kind="schild", horizon_periods=1, **SCHILD))
    for d in ("a", "b"):
        assert cli.main(["run", sc, "--out-dir", str(tmp_path / d)]) == 0
    for name in ("params.json", "solution.json", "trajectory.csv", "residual.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_schema_errors_exit_2(tmp_path, capsys):
    sc = write(tmp_path / "s.json", {"kind": "schild", "m1": "heavy", "m2": 1.0})
    assert cli.main(["run", sc]) == 2
    report = json.loads(capsys.readouterr().err)
    assert report["error"] == "ScenarioError"
    assert any("m1" in f for f in report["fields"])
    sc = write(tmp_path / "k.json", {"kind": "teleport"})
    assert cli.main(["run", sc]) == 2


def test_missing_and_malformed_files_exit_2(tmp_path):
    assert cli.main(["run", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", str(bad)]) == 2
    sc = write(tmp_path / "e.json", {"kind": "energy-audit", "solution": "missing.json"})
    assert cli.main(["run", sc]) == 2


def test_validate_command(tmp_path, strips, capsys):
    good = write(tmp_path / "good.json", strips.to_dict())
    assert cli.main(["validate", good]) == 0
    assert json.loads(capsys.readouterr().out)["ok"] is True
    l1 = straight_line([0, 0, 0], [0, 0, 0], 0.0, 2.0, label=1)
    l2 = straight_line([0, 0, 0], [0, 0, 0], 1.0, 3.0, label=2, charge=-1.0)
    bad = write(tmp_path / "bad.json", InitialData(l1, l2).to_dict())
    assert cli.main(["validate", bad]) == 2


def test_construct_inside_strips(tmp_path, schild):
    dT = schild.delta_t
    sc = write(tmp_path / "c.json", {"kind": "construct", "initial_data": {"schild": SCHILD},
                                     "horizons": [1.2 * dT, 1.8 * dT], "dt": 0.1})
    assert cli.main(["run", sc]) == 0
    _, rows = read_csv(tmp_path / "trajectory.csv")
    # overlap of the strips is [dT, 2 dT]
    assert rows[0][0] == pytest.approx(dT) and rows[-1][0] <= 2 * dT
    assert len(rows) == int(dT / 0.1) + 1
    sol = SolutionPair.from_dict(json.loads((tmp_path / "solution.json").read_text()))
    assert sol.stop_reason == "reached-horizon"


def test_empty_overlap_writes_header_only(tmp_path, strips):
    sol = SolutionPair.from_lines(strips.line_1, strips.line_2)
    n = cli.emit_trajectory_csv(sol, 0.1, tmp_path / "t.csv", (100.0, 200.0))
    assert n == 0
    assert (tmp_path / "t.csv").read_text().count("\n") == 1


def test_exit_code_taxonomy():
    assert cli.exit_code(cli.ScenarioError("x")) == 2
    assert cli.exit_code(E.InvalidAnchor("x")) == 2
    assert cli.exit_code(E.ValidationFailure("x")) == 2
    assert cli.exit_code(E.GuardSpeed("x")) == 3
    assert cli.exit_code(cli.GuardStop("guard-separation")) == 3
    assert cli.exit_code(E.QuadratureFailure("x", error_estimate=1.0)) == 4
    assert cli.exit_code(E.InternalInvariantViolation("x")) == 4


@given(st.floats(-10, 10), st.floats(0, 10), st.floats(0.01, 1))
def test_uniform_times(lo, span, dt):
    ts = cli.uniform_times(lo, lo + span, dt)
    assert ts[0] == lo and ts[-1] <= lo + span
    assert np.allclose(np.diff(ts), dt)
    assert lo + span - ts[-1] < dt * (1 + 1e-9)


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "wfdelay", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("run", "validate", "schild"):
        assert cmd in out.stdout
