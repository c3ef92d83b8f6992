"""A small arithmetic expression language for config-supplied formulas.

Only numbers, whitelisted names, ``+ - * / **``, unary signs and a few math
functions are accepted; everything else is rejected at compile time.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import ConfigError, DomainError

FUNCTIONS = {
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "sin": math.sin,
    "cos": math.cos,
    "tanh": math.tanh,
    "abs": abs,
    "min": min,
    "max": max,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}
_UNARY = {ast.UAdd: lambda a: a, ast.USub: lambda a: -a}


@dataclass(frozen=True)
class Expr:
    text: str
    names: frozenset
    _tree: ast.AST = field(repr=False, compare=False, default=None)

    def __call__(self, env: Mapping[str, float] | None = None, **kw) -> float:
        scope = dict(env or {})
        scope.update(kw)
        try:
            return float(_eval(self._tree, scope))
        except (ArithmeticError, ValueError) as exc:
            raise DomainError(f"cannot evaluate {self.text!r}: {exc}") from exc

    @property
    def free_names(self) -> set:
        return {n.id for n in ast.walk(self._tree) if isinstance(n, ast.Name)} - set(FUNCTIONS) - set(CONSTANTS)


def _eval(node, env):
    if isinstance(node, ast.Expression):
        return _eval(node.body, env)
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        return env[node.id]
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, env), _eval(node.right, env))
    if isinstance(node, ast.UnaryOp):
        return _UNARY[type(node.op)](_eval(node.operand, env))
    if isinstance(node, ast.Call):
        return FUNCTIONS[node.func.id](*(_eval(a, env) for a in node.args))
    raise ConfigError(f"unsupported expression node {type(node).__name__}")


def _check(node, allowed: set, text: str):
    for sub in ast.walk(node):
        if isinstance(sub, (ast.Expression, ast.Load)) or type(sub) in _BINOPS or type(sub) in _UNARY:
            continue
        if isinstance(sub, ast.BinOp):
            if type(sub.op) not in _BINOPS:
                raise ConfigError(f"operator {type(sub.op).__name__} not allowed in {text!r}")
        elif isinstance(sub, ast.UnaryOp):
            if type(sub.op) not in _UNARY:
                raise ConfigError(f"operator {type(sub.op).__name__} not allowed in {text!r}")
        elif isinstance(sub, ast.Constant):
            if not isinstance(sub.value, (int, float)) or isinstance(sub.value, bool):
                raise ConfigError(f"only numeric literals are allowed in {text!r}")
        elif isinstance(sub, ast.Call):
            if not isinstance(sub.func, ast.Name) or sub.func.id not in FUNCTIONS or sub.keywords:
                raise ConfigError(f"function call not allowed in {text!r}")
        elif isinstance(sub, ast.Name):
            if sub.id not in allowed and sub.id not in FUNCTIONS and sub.id not in CONSTANTS:
                raise ConfigError(f"unknown name {sub.id!r} in {text!r}")
        else:
            raise ConfigError(f"syntax element {type(sub).__name__} not allowed in {text!r}")


def compile_expr(text: str | float | int, names: Iterable[str]) -> Expr:
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ConfigError(f"expression must be a string or number, got {type(text).__name__}")
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    allowed = set(names)
    _check(tree, allowed, text)
    return Expr(text, frozenset(allowed), tree)
