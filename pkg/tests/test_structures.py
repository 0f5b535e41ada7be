import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import closed_forms as cf
from cosymred import dual as D
from cosymred.errors import SingularFlat
from cosymred.fields import (
    OneFormField, ScalarField, TwoFormField, VectorField, darboux_chart, directional,
    exterior_derivative, sample_points,
)
from cosymred.integrate import RunConfig, rk4_integrate
from cosymred.structures import (
    CosymplecticStructure, HamiltonianSectionData, build_evolution_formalism, build_reeb_formalism,
    formalism_relation_check, hamilton_equations_residual, hamiltonian_lie_report, liouville_Y,
    reeb_formalism_field, reeb_invariance_report, validate_cosymplectic,
)

C1 = darboux_chart(1)
C2 = darboux_chart(2)
DB1 = CosymplecticStructure.darboux(C1)
DB2 = CosymplecticStructure.darboux(C2)


def test_darboux_valid_and_flat_pattern():
    pts = sample_points(C2, -2, 2, 50, seed=1)
    assert validate_cosymplectic(DB2, pts).passed
    F = DB2.flat_matrix(pts[:, 0])
    want = np.zeros((5, 5))
    want[0, 2] = want[1, 3] = -1  # F = Omega^T + eta eta^T
    want[2, 0] = want[3, 1] = 1
    want[4, 4] = 1
    np.testing.assert_array_equal(F, want)


def test_degenerate_pair_fails():
    ch = type(C1)(["q", "p", "t"])
    w = TwoFormField.from_terms(ch, [("q", "p", 1.0)])
    s = CosymplecticStructure(w, OneFormField.coordinate(ch, "q"))
    pts = sample_points(ch, -1, 1, 10, seed=0)
    assert not validate_cosymplectic(s, pts).passed
    with pytest.raises(SingularFlat):
        s.flat_matrix(pts[:, 0])


def test_flat_of_reeb_is_eta(osc):
    s = osc.modified()
    pts = osc.samples(30, seed=2)
    R = s.reeb_field()(pts)
    F = D.value(s.flat_darray(pts))
    np.testing.assert_allclose(np.einsum("ij...,j...->i...", F, R), s.eta(pts), atol=1e-12)


def test_flat_inverse_consistency(osc, rng):
    s = osc.modified()
    pts = osc.samples(20, seed=3)
    X = rng.normal(size=pts.shape)
    F = D.value(s.flat_darray(pts))
    back = s.sharp(np.einsum("ij...,j...->i...", F, X), pts)
    np.testing.assert_allclose(back, X, atol=1e-9)


def test_darboux_reeb_is_dt():
    pts = sample_points(C2, -2, 2, 20, seed=1)
    R = DB2.reeb_field()(pts)
    np.testing.assert_array_equal(R, np.eye(5)[4][:, None] * np.ones(20))


def test_reeb_conditions(osc, wave):
    for s in (osc, wave):
        pts = s.samples(100, seed=4)
        assert s.modified().reeb_residual(pts) < 1e-9


def test_free_particle_hamiltonian_field():
    H = ScalarField(C1, lambda x: x[1] ** 2 / 2)
    pts = sample_points(C1, -2, 2, 20, seed=5)
    X = DB1.hamiltonian_field(H)(pts)
    np.testing.assert_allclose(X, np.stack([pts[1], 0 * pts[1], 0 * pts[1]]), atol=1e-15)


def test_oscillator_fields_match_displays(osc):
    pts = osc.samples(100, seed=6)
    np.testing.assert_allclose(osc.structure.hamiltonian_field(osc.hamiltonian)(pts), cf.osc_X(pts),
                               atol=1e-12)
    np.testing.assert_allclose(osc.evolution_field()(pts), cf.osc_E(pts), atol=1e-12)
    np.testing.assert_allclose(osc.modified().omega(pts), cf.osc_omega_H(pts), atol=1e-12)


def test_wave_fields_match_displays(wave):
    pts = wave.samples(100, seed=6)
    np.testing.assert_allclose(wave.evolution_field()(pts), cf.wave_E(pts), atol=1e-12)
    np.testing.assert_allclose(wave.modified().omega(pts), cf.wave_omega_H(pts), atol=1e-12)


def test_hamiltonian_field_contraction(wave):
    # eta(X_H) = 0 and dH(X_H) = 0 for the Darboux pair
    s, H = wave.structure, wave.hamiltonian
    pts = wave.samples(50, seed=7)
    X = s.hamiltonian_field(H)
    assert np.max(np.abs(directional(X, s.eta)(pts))) < 1e-12
    assert np.max(np.abs(X.apply(H)(pts))) < 1e-12


def test_constant_hamiltonian_evolution_is_reeb():
    pts = sample_points(C1, -1, 1, 10, seed=0)
    E = DB1.evolution_field(ScalarField.constant(C1, 3.0))(pts)
    np.testing.assert_allclose(E, np.eye(3)[2][:, None] * np.ones(10), atol=1e-15)


def test_modify_zero_is_identity(osc):
    pts = osc.samples(20, seed=8)
    s = osc.structure.modify(ScalarField.constant(C2, 0.0))
    np.testing.assert_array_equal(s.omega(pts), osc.structure.omega(pts))


def test_modified_is_valid(osc, wave):
    for s in (osc, wave):
        assert validate_cosymplectic(s.modified(), s.samples(50, seed=9)).passed


def test_as_mechanical(osc):
    pts = osc.samples(100, seed=10)
    m = osc.mechanical()
    assert m.validate(pts).passed
    np.testing.assert_allclose(m.reeb(pts), cf.osc_E(pts), atol=1e-12)
    assert DB2.as_mechanical().kernel_report(pts).passed


def test_reeb_invariance(osc):
    rep = reeb_invariance_report(osc.modified(), osc.samples(30, seed=11))
    assert rep.passed, rep.metrics


def test_hamiltonian_lie_identity(wave):
    rep = hamiltonian_lie_report(wave.structure, wave.hamiltonian, wave.samples(20, seed=12))
    assert rep.passed, rep.metrics


# --------------------------------------------------------------- formalisms

def harmonic(x):
    q, p, t = x
    return (p * p + q * q) / 2


def test_reeb_formalism_zero_is_darboux():
    d = HamiltonianSectionData(1, lambda x: 0.0 * x[0])
    pts = sample_points(d.chart, -1, 1, 20, seed=0)
    np.testing.assert_allclose(build_reeb_formalism(d).omega(pts), DB1.omega(pts), atol=1e-15)


def test_reeb_formalism_harmonic_hand_expansion():
    d = HamiltonianSectionData(1, harmonic)
    pts = sample_points(d.chart, -2, 2, 50, seed=1)
    q, p, t = pts
    w = np.zeros((3, 3) + q.shape)
    w[0, 1] = 1
    w[0, 2] = q
    w[1, 2] = p
    w -= np.swapaxes(w, 0, 1)
    np.testing.assert_allclose(build_reeb_formalism(d).omega(pts), w, atol=1e-14)


def test_reeb_formalism_reeb_is_hamilton_field():
    d = HamiltonianSectionData(2, lambda x: x[2] ** 2 + x[0] * x[3] * D.sin(x[4]) + x[1] ** 4)
    pts = sample_points(d.chart, -1, 1, 50, seed=2)
    R = build_reeb_formalism(d).reeb_field()(pts)
    np.testing.assert_allclose(R, reeb_formalism_field(d)(pts), atol=1e-12)


def test_evolution_formalism_trivial_connection():
    d = HamiltonianSectionData(1, harmonic, [lambda x: 0.0 * x[0]])
    s, hy = build_evolution_formalism(d)
    pts = sample_points(d.chart, -1, 1, 20, seed=3)
    np.testing.assert_allclose(s.omega(pts), DB1.omega(pts), atol=1e-15)
    np.testing.assert_allclose(hy(pts), harmonic(pts), atol=1e-15)


def test_evolution_formalism_hand_expansion():
    # Y = q d/dq + d/dt, H = 0: omega_Y = dq^dp + p dq^dt + q dp^dt
    d = HamiltonianSectionData(1, lambda x: 0.0 * x[0], [lambda x: x[0]])
    s, _ = build_evolution_formalism(d)
    pts = sample_points(d.chart, -2, 2, 50, seed=4)
    q, p, t = pts
    w = np.zeros((3, 3) + q.shape)
    w[0, 1] = 1
    w[0, 2] = p
    w[1, 2] = q
    w -= np.swapaxes(w, 0, 1)
    np.testing.assert_allclose(s.omega(pts), w, atol=1e-14)
    np.testing.assert_allclose(-exterior_derivative(liouville_Y(d))(pts), w, atol=1e-14)


def test_evolution_field_of_HY_is_R_h():
    d = HamiltonianSectionData(2, lambda x: (x[2] ** 2 + x[3] ** 2) / 2 + x[0] * x[1] * x[4],
                               [lambda x: x[0] * x[4], lambda x: D.cos(x[1])])
    s, hy = build_evolution_formalism(d)
    pts = sample_points(d.chart, -1, 1, 50, seed=5)
    np.testing.assert_allclose(s.evolution_field(hy)(pts), reeb_formalism_field(d)(pts), atol=1e-12)


@settings(max_examples=15)
@given(st.integers(0, 2 ** 32 - 1))
def test_formalism_relation_random(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=6)

    def H(x):
        q1, q2, p1, p2, t = x
        return a[0] * p1 * p1 + a[1] * q1 * p2 * t + a[2] * q2 ** 3 + a[3] * p2 * D.sin(t)

    Y = [lambda x: a[4] * x[0] * x[4] + x[1], lambda x: a[5] * x[1] ** 2 - x[4]]
    d = HamiltonianSectionData(2, H, Y)
    pts = sample_points(d.chart, -2, 2, 200, seed=seed % 997)
    assert formalism_relation_check(d, pts).passed


def test_formalism_relation_trivial():
    d = HamiltonianSectionData(1, harmonic, [lambda x: 0.0 * x[0]])
    rep = formalism_relation_check(d, sample_points(d.chart, -1, 1, 20, seed=0))
    assert rep.metrics["max_abs_deviation"] == 0.0


def test_hamilton_equations_along_reeb_orbit():
    d = HamiltonianSectionData(1, lambda x: (x[1] ** 2 + x[0] ** 2) / 2 + 0.1 * x[0] * D.sin(x[2]))
    traj = rk4_integrate(build_reeb_formalism(d).reeb_field(), np.array([1.0, 0.0, 0.0]),
                         RunConfig(h=1e-3, T=3.0))
    assert hamilton_equations_residual(d, traj) < 1e-6
