import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import closed_forms as cf
from cosymred import dual as D
from cosymred.errors import DomainGuardViolation
from cosymred.fields import (
    CoordinateChart, ExcludedSet, OneFormField, ScalarField, SmoothMap, TwoFormField, VectorField,
    closedness_check, darboux_chart, differential, directional, exterior_derivative,
    exterior_derivative_2, fd_differential, fd_jacobian, fd_lie_derivative_2, interior_product_2,
    lie_bracket, lie_derivative_2, pullback_2form, sample_points, wedge_1_1,
)

C1 = darboux_chart(1)
C2 = darboux_chart(2)


def random_poly(rng, dim, terms=6, deg=3):
    coef = rng.normal(size=terms)
    powers = rng.integers(0, deg + 1, size=(terms, dim))

    def f(x):
        out = 0.0
        for c, pw in zip(coef, powers):
            term = c
            for xi, k in zip(x, pw):
                if k:
                    term = term * xi ** int(k)
            out = out + term
        return out

    return f


def random_vector(rng, chart):
    fs = [random_poly(rng, chart.dim, 4, 2) for _ in range(chart.dim)]
    return VectorField(chart, lambda x: [f(x) for f in fs])


def random_one_form(rng, chart):
    fs = [random_poly(rng, chart.dim, 4, 2) for _ in range(chart.dim)]
    return OneFormField(chart, lambda x: [f(x) for f in fs])


@pytest.fixture
def pts(rng):
    return sample_points(C2, -1.5, 1.5, 100, seed=7)


def test_differential_of_coordinate():
    dp = differential(ScalarField.coordinate(C1, "p1"))
    np.testing.assert_array_equal(dp([0.3, -1.0, 2.0]), [0, 1, 0])


def test_differential_oscillator(osc):
    x = osc.samples(50, seed=1)
    q1, q2, p1, p2, t = x
    want = np.stack([q1 + t, q2, p1, p2, q1 + t])  # m = Omega = v = 1
    np.testing.assert_allclose(differential(osc.hamiltonian)(x), want, atol=1e-14)


def test_differential_vs_fd(rng, pts):
    f = ScalarField(C2, random_poly(rng, 5))
    exact = differential(f)(pts)
    fd = fd_differential(f, pts)
    np.testing.assert_allclose(fd, exact, rtol=1e-6, atol=1e-6)


def test_fd_jacobian_respects_guard():
    # the base point is admissible but its left stencil point lands on x = 0
    ch = CoordinateChart(["x", "y"], [ExcludedSet("x=0", lambda c: [c[0]])])
    assert ch.allowed([1e-5 + 5e-10, 0.0])
    with pytest.raises(DomainGuardViolation):
        fd_jacobian(lambda c: c[0], [1e-5 + 5e-10, 0.0], ch, step=1e-5)


def test_d_of_dt_is_zero():
    assert not exterior_derivative(OneFormField.coordinate(C1, "t"))([0.1, 0.2, 0.3]).any()


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1))
def test_dd_zero(seed):
    rng = np.random.default_rng(seed)
    f = ScalarField(C2, random_poly(rng, 5))
    x = sample_points(C2, -1, 1, 100, seed=seed % 1000)
    assert np.max(np.abs(exterior_derivative(differential(f))(x))) < 1e-6


def test_dd_two_form_zero(rng, pts):
    a = random_one_form(rng, C2)
    assert np.max(np.abs(exterior_derivative_2(exterior_derivative(a))(pts))) < 1e-9


def test_wedge_basics():
    dq = OneFormField.coordinate(C1, "q1")
    dp = OneFormField.coordinate(C1, "p1")
    w = wedge_1_1(dq, dp)([0.0, 0.0, 0.0])
    assert w[0, 1] == 1.0 and w[1, 0] == -1.0


def test_wedge_self_zero(rng, pts):
    a = random_one_form(rng, C2)
    assert not wedge_1_1(a, a)(pts).any()


def test_dH_wedge_dt_is_modification(osc, pts):
    dt = OneFormField.coordinate(C2, "t")
    w = wedge_1_1(differential(osc.hamiltonian), dt)(pts)
    flat = np.zeros((5, 5, 1))
    flat[0, 2] = flat[1, 3] = 1
    flat -= np.swapaxes(flat, 0, 1)
    np.testing.assert_allclose(w, cf.osc_omega_H(pts) - flat, atol=1e-14)


def test_interior_product_examples(osc, pts):
    w = osc.structure.omega
    assert not interior_product_2(VectorField.coordinate(C2, "t"), w)(pts).any()
    xi = osc.action.fundamental_fields[0]
    got = interior_product_2(xi, w)(pts)
    want = np.zeros_like(got)
    want[2] = -1.0  # -xi v dp1 with xi = v = 1
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_interior_product_matrix_oracle(rng, pts):
    X = random_vector(rng, C2)
    w = exterior_derivative(random_one_form(rng, C2))
    got = interior_product_2(X, w)(pts)
    Xv, wv = X(pts), w(pts)
    for j in range(pts.shape[1]):
        np.testing.assert_allclose(got[:, j], Xv[:, j] @ wv[:, :, j], atol=1e-12)


def test_cartan_compatibility(rng, pts):
    X = random_vector(rng, C2)
    a, b = random_one_form(rng, C2), random_one_form(rng, C2)
    lhs = interior_product_2(X, wedge_1_1(a, b))(pts)
    rhs = directional(X, a)(pts) * b(pts) - directional(X, b)(pts) * a(pts)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_bracket_of_coordinate_fields(pts):
    dq = VectorField.coordinate(C2, "q1")
    dp = VectorField.coordinate(C2, "p2")
    assert not lie_bracket(dq, dp)(pts).any()


def test_action_commutes_with_reeb(osc, pts):
    xi = osc.action.fundamental_fields[0]
    R = osc.structure.reeb_field()
    assert np.max(np.abs(lie_bracket(xi, R)(pts))) < 1e-14


def test_jacobi_identity(rng, pts):
    X, Y, Z = (random_vector(rng, C2) for _ in range(3))
    jac = (lie_bracket(X, lie_bracket(Y, Z)) + lie_bracket(Y, lie_bracket(Z, X))
           + lie_bracket(Z, lie_bracket(X, Y)))
    assert np.max(np.abs(jac(pts))) < 1e-5


def test_pullback_identity(osc, pts):
    w = osc.modified().omega
    np.testing.assert_allclose(pullback_2form(SmoothMap.identity(C2), w)(pts), w(pts), atol=1e-15)


def _random_map(rng):
    A = rng.normal(size=(5, 5)) * 0.3 + np.eye(5)
    b = rng.normal(size=5) * 0.2
    return SmoothMap(C2, C2, lambda x: [sum(A[i, j] * x[j] for j in range(5)) + b[i] * D.sin(x[(i + 1) % 5])
                                        for i in range(5)])


def test_pullback_jacobian_sandwich(rng, pts, osc):
    phi = _random_map(rng)
    w = osc.modified().omega
    got = pullback_2form(phi, w)(pts)
    J = fd_jacobian(lambda c: phi.evaluate(c), pts)  # independent route
    W = w(phi(pts))
    want = np.einsum("ai...,ij...,bj...->ab...", J, W, J)
    np.testing.assert_allclose(got, want, atol=1e-7)


def test_pullback_functoriality(rng, pts, osc):
    phi, psi = _random_map(rng), _random_map(rng)
    w = osc.modified().omega
    comp = pullback_2form(psi.then(phi), w)(pts)
    nested = pullback_2form(psi, pullback_2form(phi, w))(pts)
    np.testing.assert_allclose(comp, nested, atol=1e-8)


def test_closedness_examples(osc, pts):
    assert closedness_check(osc.structure.omega, pts).metrics["max_abs_domega"] == 0.0
    assert closedness_check(osc.modified().omega, pts).passed


def test_closedness_broken_form():
    # q dq^dp + p dq^dt on (q, p, t): (dw)_{q p t} = d_p(p) ... = -1 up to sign
    w = TwoFormField.from_terms(C1, [("q1", "p1", lambda x: x[0]), ("q1", "t", lambda x: x[1])])
    x = sample_points(C1, -1, 1, 20, seed=2)
    rep = closedness_check(w, x)
    assert not rep.passed
    dw = exterior_derivative_2(w)(x)
    # d(q dq^dp) = 0, d(p dq^dt) = dp^dq^dt = -dq^dp^dt
    np.testing.assert_allclose(dw[0, 1, 2], -1.0)


def test_lie_derivative_exact_vs_flow(rng, osc):
    X = osc.structure.hamiltonian_field(osc.hamiltonian)
    w = osc.structure.omega
    x = osc.samples(3, seed=4)
    for j in range(3):
        exact = lie_derivative_2(X, w)(x[:, j])
        fd = fd_lie_derivative_2(X, w, x[:, j])
        np.testing.assert_allclose(fd, exact, atol=1e-7)


def test_guard_rejects_excluded():
    ch = darboux_chart(1, [ExcludedSet("q=0", lambda c: [c[0]])])
    f = ScalarField(ch, lambda x: x[1])
    with pytest.raises(DomainGuardViolation):
        f([0.0, 1.0, 0.0])
    assert f([0.1, 1.0, 0.0]) == 1.0


def test_sample_points_reproducible():
    a = sample_points(C2, -1, 1, 30, seed=9)
    b = sample_points(C2, -1, 1, 30, seed=9)
    assert a.shape == (5, 30) and np.array_equal(a, b)
