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
"""Concurrent task runner, wrapper around a standard Executor from concurrent.futures."""

from concurrent.futures import Executor, Future, ThreadPoolExecutor
from threading import Lock

import attrs

from ..tasks import Task
from .base import RunnerBase

__all__ = ("ConcurrentRunner",)


@attrs.define
class ConcurrentRunner(RunnerBase):
    """Run tasks asynchronously with an Executor, by default a pool of ``max_workers`` threads."""

    executor: Executor | None = attrs.field(default=None)
    max_workers: int | None = attrs.field(default=None)
    _submit_lock: Lock = attrs.field(init=False, factory=Lock)

    def __attrs_post_init__(self):
        if self.executor is None:
            self.executor = ThreadPoolExecutor(self.max_workers)

    def __call__(self, task: Task) -> Future:
        print(f"Submitting {task.describe()}")
        with self._submit_lock:
            return self.executor.submit(task)

    def shutdown(self):
        """Wait for all futures to complete."""
        print("Shutting down the executor")
        self.executor.shutdown()
