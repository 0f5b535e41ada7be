import math

import numpy as np
import pytest

from cosymred import dual as D
from cosymred.errors import ParseError
from cosymred.expressions import Expression, compile_expr, constant_value, split_top


def test_caret_is_power_and_precedence():
    assert constant_value("2^3^2") == 2 ** 9
    assert constant_value("-2^2") == -4
    assert constant_value("1 + 2*3 - 4/2") == 5


def test_constants_and_functions():
    assert constant_value("cos(pi)") == -1
    assert constant_value("m*v^2/2", {"m": 2.0, "v": 3.0}) == 9.0
    assert constant_value("exp(1)") == pytest.approx(math.e)


def test_on_coordinate_list_arrays():
    f = compile_expr("p1^2/2 - a*p2*cos(q1 - t)", ["q1", "p1", "p2", "t"], {"a": 0.1}).on(
        ["q1", "p1", "p2", "t"])
    x = np.random.default_rng(0).normal(size=(4, 5))
    want = x[1] ** 2 / 2 - 0.1 * x[2] * np.cos(x[0] - x[3])
    np.testing.assert_allclose(f(list(x)), want)


def test_differentiable():
    f = compile_expr("sin(x)*x^2", ["x"]).on(["x"])
    assert D.derivative(lambda s: f([s]), 1.0) == pytest.approx(math.cos(1) + 2 * math.sin(1))


@pytest.mark.parametrize("text", ["", "1 +", "__import__('os')", "x.y", "x[0]", "lambda: 1",
                                  "foo(1)", "sin(1, 2)", "z", "1 if x else 2", "x < 1"])
def test_rejected(text):
    with pytest.raises(ParseError):
        Expression(text, ["x"], key="sec.key", line=7)


def test_error_carries_key_and_line():
    with pytest.raises(ParseError) as ei:
        Expression("q9 + 1", ["q1"], key="hamiltonian.H", line=12)
    assert ei.value.line == 12 and ei.value.key == "hamiltonian.H"


def test_split_top():
    assert split_top("a, f(b, c), d") == ["a", "f(b, c)", "d"]
    assert split_top("") == []
