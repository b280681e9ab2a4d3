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
"""Run the scenario files shipped in demos/scenarios."""

from pathlib import Path

import pytest

from evolin.scripts.cli import run_scenario

SCENARIOS = sorted((Path(__file__).parent.parent / "demos" / "scenarios").glob("*.json"))


@pytest.mark.parametrize("path", SCENARIOS, ids=[path.stem for path in SCENARIOS])
def test_scenario(path, tmp_path):
    expected = 3 if path.stem == "violating" else 0
    assert run_scenario(path, tmp_path / path.stem) == expected
    assert (tmp_path / path.stem / "report.json").is_file()
