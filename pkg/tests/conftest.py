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
"""Shared fixtures for the unit tests."""

import numpy as np
import pytest

from evolin.weighted_time import TimeGrid, Weight


@pytest.fixture()
def rng():
    """Seeded generator, so that randomized checks are reproducible."""
    return np.random.default_rng(42)


@pytest.fixture()
def grid():
    """Small grid on [-1, 3] with h = 0.05."""
    return TimeGrid.from_window(-1.0, 3.0, 0.05)


@pytest.fixture()
def weight():
    return Weight(1.0)


@pytest.fixture()
def outdir(tmp_path, monkeypatch):
    """Redirect the default output root of the command-line scripts."""
    monkeypatch.setenv("EVOLIN_OUT", str(tmp_path / "out"))
    return tmp_path / "out"
