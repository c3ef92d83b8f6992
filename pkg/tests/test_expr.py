from __future__ import annotations

import math

import pytest

from mkvorder.errors import ConfigError
from mkvorder.expr import compile_expr


def test_arithmetic_and_functions():
    e = compile_expr("-2*a*x + exp(-t)*sqrt(4) + max(x, 1)**2", ("a", "x", "t"))
    assert e(a=1.0, x=3.0, t=0.0) == pytest.approx(-6 + 2 + 9)
    assert compile_expr("pi", ())() == pytest.approx(math.pi)
    assert compile_expr(2.5, ())() == 2.5
    assert compile_expr("a + b", ("a", "b", "c")).free_names == {"a", "b"}


@pytest.mark.parametrize("text", [
    "__import__('os')", "x.real", "[1, 2]", "x if x else 1", "open('f')", "lambda: 1", "y", "x[0]", "1 < 2",
])
def test_rejects_unsafe(text):
    with pytest.raises(ConfigError):
        compile_expr(text, ("x",))


def test_evaluation_errors_are_domain_errors():
    from mkvorder.errors import DomainError

    with pytest.raises(DomainError):
        compile_expr("1/x", ("x",))(x=0.0)
    with pytest.raises(DomainError):
        compile_expr("log(x)", ("x",))(x=-1.0)
