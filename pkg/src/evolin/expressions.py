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
"""Closed-form coefficient expressions in the time variable ``t``.

Expressions are parsed once with :mod:`ast` and evaluated with NumPy on whole arrays
of sample times. Only arithmetic, numbers, ``t``, ``pi``, ``e`` and a small set of
elementary functions are accepted.
"""

import ast

import attrs
import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ContractError

__all__ = ("Expression", "ExpressionArray")


_FUNCTIONS = {
    "abs": np.abs,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "sqrt": np.sqrt,
    "tanh": np.tanh,
    "step": lambda x: np.heaviside(x, 1.0),
}

_CONSTANTS = {"pi": np.pi, "e": np.e}

_BINARY = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _check(node: ast.AST, source: str):
    if isinstance(node, ast.Expression):
        _check(node.body, source)
    elif isinstance(node, ast.BinOp) and type(node.op) in _BINARY:
        _check(node.left, source)
        _check(node.right, source)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub | ast.UAdd):
        _check(node.operand, source)
    elif isinstance(node, ast.Constant) and isinstance(node.value, int | float):
        pass
    elif isinstance(node, ast.Name) and (node.id == "t" or node.id in _CONSTANTS):
        pass
    elif (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id in _FUNCTIONS
        and len(node.args) == 1
        and not node.keywords
    ):
        _check(node.args[0], source)
    else:
        raise ContractError(f"Unsupported token '{ast.unparse(node)}' in expression '{source}'")


def _evaluate(node: ast.AST, t: NDArray) -> NDArray:
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, t)
    if isinstance(node, ast.BinOp):
        return _BINARY[type(node.op)](_evaluate(node.left, t), _evaluate(node.right, t))
    if isinstance(node, ast.UnaryOp):
        operand = _evaluate(node.operand, t)
        return -operand if isinstance(node.op, ast.USub) else operand
    if isinstance(node, ast.Constant):
        return np.float64(node.value)
    if isinstance(node, ast.Name):
        return t if node.id == "t" else np.float64(_CONSTANTS[node.id])
    return _FUNCTIONS[node.func.id](_evaluate(node.args[0], t))


@attrs.frozen
class Expression:
    """A scalar function of time given as a string, e.g. ``"1 + 0.5*sin(t)"``."""

    source: str = attrs.field(converter=str)

    def __attrs_post_init__(self):
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ContractError(f"Cannot parse expression '{self.source}': {exc.msg}") from exc
        _check(tree, self.source)

    def __call__(self, t: ArrayLike) -> NDArray:
        t = np.asarray(t, dtype=float)
        tree = ast.parse(self.source, mode="eval")
        return np.broadcast_to(_evaluate(tree, t), t.shape).astype(float)


def _as_expressions(value) -> tuple:
    if isinstance(value, str | int | float):
        return Expression(str(value))
    return tuple(_as_expressions(item) for item in value)


@attrs.frozen
class ExpressionArray:
    """A nested list of expressions, evaluated to an array of shape ``(len(t),) + shape``."""

    entries: tuple = attrs.field(converter=_as_expressions)

    @property
    def shape(self) -> tuple[int, ...]:
        shape = []
        level = self.entries
        while isinstance(level, tuple):
            shape.append(len(level))
            level = level[0]
        return tuple(shape)

    def __call__(self, t: ArrayLike) -> NDArray:
        t = np.asarray(t, dtype=float)

        def build(entries):
            if isinstance(entries, Expression):
                return entries(t)
            return np.stack([build(item) for item in entries], axis=1)

        return build(self.entries)
