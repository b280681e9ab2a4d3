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
"""Exception classes raised throughout Evolin."""

from typing import Any

__all__ = (
    "ContractError",
    "ConvergenceError",
    "DomainError",
    "HypothesisViolation",
    "NonContractionError",
    "StructuralError",
    "UnsupportedError",
)


class StructuralError(ValueError):
    """Raised when grids, weights, dimensions or array shapes do not fit together."""


class ContractError(ValueError):
    """Raised when a precondition of an operation is violated."""


class DomainError(ValueError):
    """Raised when a resolvent cannot be evaluated for some component."""


class HypothesisViolation(ValueError):
    """Raised when a material law is not uniformly positive (c_est <= 0)."""


class UnsupportedError(NotImplementedError):
    """Raised for features outside the implemented scope."""


class ConvergenceError(RuntimeError):
    """Raised when an iteration fails to converge within the allowed budget.

    Parameters
    ----------
    message
        Human-readable description of the failure.
    residual
        The last residual seen by the iteration, if any.
    report
        A partial report (e.g. a SolveReport) that helps to diagnose the failure.
    """

    def __init__(self, message: str, residual: float | None = None, report: Any = None):
        super().__init__(message)
        self.residual = residual
        self.report = report


class NonContractionError(ConvergenceError):
    """Raised when a Picard iteration shows three consecutive increases of its residual.

    ``advised_delta`` is a shift for which the iteration contracts.
    """

    def __init__(
        self, message: str, residual: float | None = None, advised_delta: float | None = None
    ):
        super().__init__(message, residual)
        self.advised_delta = advised_delta
