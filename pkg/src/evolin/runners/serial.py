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
"""Serial task runner, mainly useful for debugging and for deterministic timing."""

import attrs

from ..harness import CheckReport
from ..tasks import Task
from .base import RunnerBase

__all__ = ("SerialRunner",)


@attrs.define
class SerialRunner(RunnerBase):
    """Just execute everything right away."""

    def __call__(self, task: Task) -> list[CheckReport]:
        print(f"Running {task.describe()}")
        return task()
