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
"""Unit tests for evolin.runners."""

from concurrent.futures import ThreadPoolExecutor

import pytest

from evolin.harness import CheckReport
from evolin.runners import ConcurrentRunner, RunnerBase, SerialRunner
from evolin.tasks import Task


def square(x):
    return [CheckReport(f"square{x}", True, x * x, 100.0)]


def fails():
    raise ValueError("bad input")


def make_tasks():
    tasks = [Task(f"task{x}", square, {"x": x}) for x in range(8)]
    tasks.append(Task("fails", fails))
    return tasks


def check_results(results):
    assert list(results) == [task.name for task in make_tasks()]
    assert [results[f"task{x}"][0].achieved for x in range(8)] == [x * x for x in range(8)]
    assert not results["fails"][0].passed
    assert "bad input" in results["fails"][0].details["error"]


def test_serial(capsys):
    check_results(SerialRunner().collect(make_tasks()))
    assert "Running task3 (square)" in capsys.readouterr().out


@pytest.mark.parametrize("max_workers", [1, 3])
def test_concurrent(max_workers, capsys):
    check_results(ConcurrentRunner(max_workers=max_workers).collect(make_tasks()))
    out = capsys.readouterr().out
    assert "Submitting task0 (square)" in out
    assert "Shutting down the executor" in out


def test_concurrent_executor():
    executor = ThreadPoolExecutor(2)
    check_results(ConcurrentRunner(executor).collect(make_tasks()))
    with pytest.raises(RuntimeError):
        executor.submit(square, 1)


def test_serial_matches_concurrent():
    serial = SerialRunner().collect(make_tasks())
    concurrent = ConcurrentRunner().collect(make_tasks())
    assert serial == concurrent


def test_duplicate_names():
    tasks = [Task("same", square, {"x": 1}), Task("same", square, {"x": 2})]
    with pytest.raises(ValueError):
        SerialRunner().collect(tasks)


def test_base_runner():
    with pytest.raises(NotImplementedError):
        RunnerBase()(Task("task", square, {"x": 1}))
