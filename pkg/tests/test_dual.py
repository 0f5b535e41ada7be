import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cosymred import dual as D

finite = st.floats(-3, 3, allow_nan=False)


def test_derivative_of_polynomial():
    assert D.derivative(lambda s: s ** 3 - 2 * s, 2.0) == pytest.approx(10.0)


def test_nested_derivatives_do_not_mix():
    # d/dx [x * d/dy (x*y)] = 2x
    f = lambda x: x * D.derivative(lambda y: x * y, 3.0)  # noqa: E731
    assert D.value(D.derivative(f, 1.5)) == pytest.approx(3.0)


def test_second_derivative():
    g = lambda s: D.derivative(lambda u: D.sin(u) * u, s)  # noqa: E731
    x = 0.7
    assert D.derivative(g, x) == pytest.approx(2 * math.cos(x) - x * math.sin(x), abs=1e-14)


@pytest.mark.parametrize("name, fprime", [
    ("sin", math.cos), ("cos", lambda x: -math.sin(x)), ("exp", math.exp),
    ("tan", lambda x: 1 / math.cos(x) ** 2), ("sinh", math.cosh), ("cosh", math.sinh),
    ("tanh", lambda x: 1 - math.tanh(x) ** 2), ("arctan", lambda x: 1 / (1 + x * x)),
])
def test_elementary_derivatives(name, fprime):
    f = D.ELEMENTARY[name]
    assert D.derivative(f, 0.4) == pytest.approx(fprime(0.4), rel=1e-14)


def test_log_sqrt():
    assert D.derivative(D.log, 2.0) == pytest.approx(0.5)
    assert D.derivative(D.sqrt, 4.0) == pytest.approx(0.25)


def test_jacobian_batch_shape():
    x = np.random.default_rng(0).normal(size=(3, 7))
    J = D.jacobian(lambda c: D.stack([c[0] * c[1], D.sin(c[2])]), x)
    assert J.shape == (3, 2, 7)
    np.testing.assert_allclose(J[0, 0], x[1])
    np.testing.assert_allclose(J[1, 0], x[0])
    np.testing.assert_allclose(J[2, 1], np.cos(x[2]))
    assert np.all(J[2, 0] == 0)


def test_jacobian_constant_output():
    J = D.jacobian(lambda c: np.eye(3), [1.0, 2.0])
    assert J.shape == (2, 3, 3) and not J.any()


@given(finite, finite)
def test_product_rule(a, b):
    f = lambda s: D.exp(a * s) * D.cos(b * s)  # noqa: E731
    s = 0.3
    want = a * math.exp(a * s) * math.cos(b * s) - b * math.exp(a * s) * math.sin(b * s)
    assert D.derivative(f, s) == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_solve_derivative_matches_closed_form():
    # d/ds (A + sB)^{-1} b = -A^{-1} B A^{-1} b
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    B = rng.normal(size=(4, 4))
    b = rng.normal(size=4)
    got = D.derivative(lambda s: D.solve(A + s * B, b), 0.0)
    x = np.linalg.solve(A, b)
    np.testing.assert_allclose(got, -np.linalg.solve(A, B @ x), atol=1e-13)
