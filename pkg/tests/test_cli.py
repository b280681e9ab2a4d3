# Evolin solves evolutionary inclusions on exponentially weighted time lines.
# Copyright (C) 2024 The Evolin Development Team
#
# This file is part of Evolin.
#
# Evolin is free software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 3
# of the License, or (at your option) any later version.
#
# Evolin is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public License
# along with this program; if not, see <http://www.gnu.org/licenses/>
#
# --
"""Unit tests for the evolin command."""

import json

import pytest

from evolin.errors import ConvergenceError
from evolin.maxwell import assemble_block
from evolin.scenario import CHECKS
from evolin.scripts.cli import CHECK_FUNCTIONS, main, run_scenario, run_suite

SMALL = {
    "kind": "inclusion",
    "time": {"t0": -1.0, "t1": 2.0, "h": 0.05},
    "rho": 1.0,
    "law": {"M": {"diagonal": ["1"]}, "N": {"diagonal": ["0"]}},
    "relation": {"kind": "sign"},
    "f": ["0.5*step(t)"],
    "routes": "timestep",
    "checks": ["causality"],
}


def write_scenario(path, **changes):
    path.write_text(json.dumps({**SMALL, **changes}))
    return path


def read_report(out):
    return json.loads((out / "report.json").read_text())


def test_check_functions():
    assert tuple(CHECK_FUNCTIONS) == CHECKS


def test_run(tmp_path):
    path = write_scenario(tmp_path / "small.json")
    out = tmp_path / "small"
    assert main(["run", str(path), "--out", str(out)]) == 0
    assert (out / "solution.csv").read_text().startswith("t,u0\n")
    assert (out / "convergence.csv").is_file()
    report = read_report(out)
    assert report["passed"] is True
    assert report["status"] == 0
    assert report["kind"] == "inclusion"
    assert [check["name"] for check in report["checks"]] == ["causality"]
    assert report["solve"]["route"] == "timestep"


def test_run_default_out(tmp_path, outdir):
    path = write_scenario(tmp_path / "small.json")
    assert run_scenario(path) == 0
    assert (tmp_path / "out" / "small" / "report.json").is_file()


def test_run_route_alias(tmp_path):
    path = write_scenario(tmp_path / "small.json", routes="both")
    out = tmp_path / "small"
    assert main(["run", str(path), "--routes", "b", "--out", str(out)]) == 0
    assert read_report(out)["routes"] == "timestep"


def test_run_deterministic(tmp_path):
    path = write_scenario(tmp_path / "small.json", checks=["causality", "lipschitz"])
    for name in "first", "second":
        assert run_scenario(path, tmp_path / name, seed=3) == 0
    for name in "report.json", "solution.csv":
        assert (tmp_path / "first" / name).read_text() == (tmp_path / "second" / name).read_text()


def test_run_extra_key(tmp_path, capsys):
    path = write_scenario(tmp_path / "bad.json", colour="blue")
    assert run_scenario(path, tmp_path / "bad") == 2
    err = capsys.readouterr().err
    assert "Invalid scenario" in err
    assert "colour" in err
    assert not (tmp_path / "bad").exists()


def test_run_missing_file(tmp_path):
    assert run_scenario(tmp_path / "missing.json", tmp_path / "out") == 2


def test_run_unknown_check(tmp_path):
    path = write_scenario(tmp_path / "small.json")
    with pytest.raises(SystemExit) as excinfo:
        main(["run", str(path), "--check", "energy"])
    assert excinfo.value.code == 2


def test_run_violating(tmp_path, capsys):
    law = {"M": {"diagonal": ["1"]}, "N": {"diagonal": ["-1"]}}
    path = write_scenario(tmp_path / "violating.json", law=law)
    out = tmp_path / "violating"
    assert run_scenario(path, out) == 3
    assert "Positivity constant" in capsys.readouterr().err
    report = read_report(out)
    assert report["status"] == 3
    assert report["solve"] is None
    assert not (out / "solution.csv").exists()


def test_run_no_convergence(tmp_path, monkeypatch, capsys):
    def stuck(*args, **kwargs):
        raise ConvergenceError("stuck at lambda=0.25", residual=0.5)

    monkeypatch.setattr("evolin.scripts.cli.solve", stuck)
    path = write_scenario(tmp_path / "small.json")
    out = tmp_path / "small"
    assert run_scenario(path, out) == 4
    assert "No convergence" in capsys.readouterr().err
    report = read_report(out)
    assert report["status"] == 4
    assert report["residual"] == 0.5


def test_run_maxwell_assembles_once(tmp_path, monkeypatch):
    calls = []

    def counted(*args, **kwargs):
        calls.append(args)
        return assemble_block(*args, **kwargs)

    monkeypatch.setattr("evolin.maxwell.assemble_block", counted)
    maxwell = {"nx": 3, "ny": 3, "Z": {"kind": "linear", "alpha": 1.0}}
    path = tmp_path / "eddy.json"
    path.write_text(
        json.dumps(
            {
                "kind": "maxwell",
                "time": {"t0": -0.5, "t1": 1.0, "h": 0.1},
                "maxwell": maxwell,
                "routes": "timestep",
            }
        )
    )
    out = tmp_path / "eddy"
    assert run_scenario(path, out) == 0
    assert len(calls) == 1
    report = read_report(out)
    assert report["kind"] == "maxwell"
    assert report["maxwell"]["diagnostics"]["div_drift"] <= 1e-10


def test_run_failed_check(tmp_path):
    path = write_scenario(tmp_path / "small.json")
    out = tmp_path / "small"
    assert run_scenario(path, out, checks=["saturation"]) == 1
    report = read_report(out)
    assert report["passed"] is False
    assert "ContractError" in report["checks"][0]["details"]["error"]


def test_suite_invalid_refine(tmp_path):
    assert run_suite(grid_refine=0, out=tmp_path) == 2
    assert not (tmp_path / "suite.json").exists()


def test_suite_quick(tmp_path, capsys):
    assert main(["suite", "--quick", "--workers", "2", "--out", str(tmp_path)]) == 0
    assert "negative_controls" in capsys.readouterr().out
    suite = json.loads((tmp_path / "suite.json").read_text())
    assert suite["passed"] is True
    assert suite["quick"] is True
    assert suite["settings"]["routes"] == ["timestep"]
    assert "maxwell_run" in suite["results"]
