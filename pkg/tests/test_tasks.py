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
"""Unit tests for evolin.tasks."""

import numpy as np

from evolin.harness import CheckReport
from evolin.tasks import (
    SuiteSettings,
    Task,
    build_suite,
    constants_table,
    maxwell_structure_checks,
    negative_control_checks,
    ode_benchmark,
    resolvent_checks,
)


def broken():
    raise ArithmeticError("overflow in the check")


def test_task_error_becomes_report():
    task = Task("broken", broken)
    assert task.describe() == "broken (broken)"
    (report,) = task()
    assert not report.passed
    assert report.name == "broken"
    assert "overflow" in report.details["error"]


def test_build_suite_names():
    names = [task.name for task in build_suite(0)]
    assert len(names) == len(set(names))
    assert "causality[sign_step]" in names
    assert "route_agreement[ode_linear]" in names
    assert "rho_independence[time_varying]" in names
    assert "maxwell_structure[16]" in names
    quick = [task.name for task in build_suite(0, SuiteSettings.quick())]
    assert not any(name.startswith("route_agreement") for name in quick)
    assert "maxwell_structure[4]" in quick


def _draws(seed):
    return {
        task.name: task.kwargs["rng"].normal(size=3)
        for task in build_suite(seed, SuiteSettings.quick())
        if "rng" in task.kwargs
    }


def test_build_suite_seeds():
    first, second, other = _draws(5), _draws(5), _draws(6)
    assert first.keys() == second.keys() == other.keys()
    assert len(first) > 3
    for name in first:
        np.testing.assert_array_equal(first[name], second[name])
        assert not np.array_equal(first[name], other[name])
    streams = list(first.values())
    assert not np.array_equal(streams[0], streams[1])


def test_resolvent_checks(rng):
    reports = resolvent_checks(samples=500, oracle_samples=5, rng=rng)
    assert [report.name for report in reports[:3]] == [
        "nonexpansive",
        "yosida_lipschitz",
        "resolvent_oracle",
    ]
    assert len(reports) == 9
    assert all(report.passed for report in reports)


def test_ode_benchmark():
    reports = ode_benchmark(h=0.05, refine=2, window=(-1.0, 4.0), routes=("timestep",))
    assert [report.name for report in reports] == ["ode_error", "ode_error", "ode_order"]
    assert all(report.passed for report in reports)
    assert reports[-1].achieved >= 0.9


def test_maxwell_structure_checks(rng):
    reports = maxwell_structure_checks(4, rng)
    assert all(report.passed for report in reports)
    assert reports[-1].details["edge"] == 0
    assert reports[-1].details["cell"] == 1


def test_negative_control_checks(rng):
    nonmonotone, hypothesis = negative_control_checks(h=0.05, rng=rng)
    assert nonmonotone.passed
    assert hypothesis.passed
    assert "Positivity constant" in hypothesis.details["message"]
    assert hypothesis.achieved < 0


def test_constants_table():
    results = {
        "first": [CheckReport("c_est", True, 0.98, 0.0)],
        "second": [CheckReport("lipschitz", False, 1.2, 1.05)],
    }
    lines = constants_table(results).splitlines()
    assert lines[0].split() == ["task", "check", "achieved", "threshold", "status"]
    assert lines[1].split() == ["first", "c_est", "9.800e-01", "0.000e+00", "ok"]
    assert lines[2].split() == ["second", "lipschitz", "1.200e+00", "1.050e+00", "FAILED"]
