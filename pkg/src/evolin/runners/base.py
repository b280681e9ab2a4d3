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
"""Base class for all task runners."""

from concurrent.futures import Future

import attrs

from ..harness import CheckReport
from ..tasks import Task

__all__ = ("RunnerBase",)


@attrs.define
class RunnerBase:
    """Submit tasks with ``__call__`` and collect their reports in submission order.

    Subclasses override ``__call__``, which returns either the reports or a Future.
    """

    def __call__(self, task: Task) -> list[CheckReport] | Future:
        """Execute a task (somewhere)."""
        raise NotImplementedError

    def shutdown(self):
        """Wait until all tasks have completed."""

    def collect(self, tasks: list[Task]) -> dict[str, list[CheckReport]]:
        """Run all tasks and return their reports by task name, in the order of ``tasks``."""
        names = [task.name for task in tasks]
        if len(set(names)) != len(names):
            raise ValueError("Task names must be unique")
        submitted = [self(task) for task in tasks]
        results = {}
        try:
            for name, result in zip(names, submitted):
                results[name] = result.result() if isinstance(result, Future) else result
        finally:
            self.shutdown()
        return results
