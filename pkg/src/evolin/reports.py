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
"""Writers for the files of a run: trajectories as CSV, reports as JSON."""

import csv
import json
import math
from pathlib import Path
from typing import Any

import attrs
import cattrs
import numpy as np

from .solver import LambdaEntry, SolveReport
from .weighted_time import WeightedSignal

__all__ = (
    "CONVERGENCE_COLUMNS",
    "report_converter",
    "to_jsonable",
    "write_convergence",
    "write_json",
    "write_solution",
)


CONVERGENCE_COLUMNS = tuple(field.name for field in attrs.fields(LambdaEntry))


def _signal_summary(signal: WeightedSignal) -> dict[str, Any]:
    return {
        "t0": signal.grid.t0,
        "h": signal.grid.h,
        "n": signal.grid.n,
        "rho": signal.weight.rho,
        "dim": signal.dim,
    }


def _unstructure_report(report: SolveReport) -> dict[str, Any]:
    """All diagnostics of a SolveReport; trajectories are summarized, not included."""
    converter = report_converter()
    return {
        "route": report.route,
        "u": _signal_summary(report.u),
        "c_est": report.c_est,
        "delta": report.delta,
        "lambda_schedule": report.lambda_schedule,
        "per_lambda": converter.unstructure(report.per_lambda, list[LambdaEntry]),
        "residual_final": report.residual_final,
        "residuals": report.residuals,
        "routes": sorted(report.solutions),
        "route_agreement": report.route_agreement,
        "bounds": report.bounds,
        "converged": report.converged,
    }


def _array_to_list(array) -> list:
    return np.asarray(array).tolist()


def _is_array_type(cls) -> bool:
    return cls is np.ndarray or getattr(cls, "__origin__", None) is np.ndarray


def report_converter() -> cattrs.Converter:
    converter = cattrs.Converter()
    converter.register_unstructure_hook_func(_is_array_type, _array_to_list)
    converter.register_unstructure_hook(WeightedSignal, _signal_summary)
    converter.register_unstructure_hook(SolveReport, _unstructure_report)
    return converter


def to_jsonable(data: Any) -> Any:
    """Unstructure data and replace numpy scalars and non-finite floats."""
    return _clean(report_converter().unstructure(data))


def _clean(data: Any) -> Any:
    if isinstance(data, dict):
        return {str(key): _clean(value) for key, value in data.items()}
    if isinstance(data, list | tuple):
        return [_clean(item) for item in data]
    if isinstance(data, np.ndarray):
        return _clean(data.tolist())
    if isinstance(data, np.generic):
        data = data.item()
    if isinstance(data, float) and not math.isfinite(data):
        return str(data)
    return data


def write_json(path: Path, data: Any):
    """Write deterministic JSON: sorted keys, two-space indentation."""
    with open(path, "w") as fh:
        json.dump(to_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_solution(path: Path, signal: WeightedSignal, names: list[str] | None = None):
    """One row per time step with columns ``t`` and one per component."""
    names = [f"u{i}" for i in range(signal.dim)] if names is None else names
    if len(names) != signal.dim:
        raise ValueError(f"Need {signal.dim} column names, got {len(names)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *names])
        for t, row in zip(signal.times, signal.values):
            writer.writerow([repr(float(t)), *(repr(float(x)) for x in row)])


def write_convergence(path: Path, entries: list[LambdaEntry]):
    """The lambda schedule of the Yosida route, one row per lambda."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONVERGENCE_COLUMNS)
        for entry in entries:
            writer.writerow(["" if value is None else value for value in attrs.astuple(entry)])
