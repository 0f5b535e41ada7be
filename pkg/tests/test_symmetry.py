import numpy as np
import pytest

import closed_forms as cf
from cosymred import dual as D
from cosymred.errors import FlowMismatch, NonConstant, NotInvariant, TangencyDetected
from cosymred.fields import ScalarField, darboux_chart, differential, sample_points
from cosymred.structures import CosymplecticStructure
from cosymred.symmetry import (
    AbelianAction, Cocycle, MomentumMap, albert_condition, check_cosymplectic_action,
    check_presym_symmetry, compute_cocycle, derivative_along, modified_action,
    modified_action_report, modify_momentum, noether_report, verify_momentum,
)

C1 = darboux_chart(1)
DB1 = CosymplecticStructure.darboux(C1)


def q_shift(chart):
    return AbelianAction(chart, 1, lambda s, x: [x[0] + s[0]] + list(x[1:]), label="q-shift")


def scaling(chart):
    return AbelianAction(chart, 1, lambda s, x: [D.exp(s[0]) * x[0]] + list(x[1:]), label="scale")


def test_action_consistency_all_builtins(osc, wave, qtrans):
    for s in (osc, wave, qtrans):
        rep = s.action.consistency_report(s.samples(100, seed=1), seed=1)
        assert rep.passed, rep.metrics


def test_cosymplectic_action_examples(osc):
    pts = osc.samples(30, seed=2)
    assert check_cosymplectic_action(osc.action, osc.structure, pts).passed
    pts1 = sample_points(C1, -1, 1, 30, seed=2)
    assert check_cosymplectic_action(q_shift(C1), DB1, pts1).passed


def test_scaling_is_not_cosymplectic():
    pts = sample_points(C1, -1, 1, 30, seed=3)
    a = scaling(C1)
    rep = check_cosymplectic_action(a, DB1, pts, seed=3)
    assert not rep.passed
    # phi_s^* (dq ^ dp) = e^s dq ^ dp
    from cosymred.fields import pullback_2form
    w = pullback_2form(a.map_at([0.5]), DB1.omega)(pts)
    np.testing.assert_allclose(w[0, 1], np.exp(0.5))


def test_cocycle_values(osc, wave, qtrans):
    assert osc.cocycle().values.tolist() == [1.0]
    assert wave.cocycle().values.tolist() == [1.0]
    assert qtrans.cocycle().values.tolist() == [0.0]
    assert osc.cocycle(osc.samples(200, seed=4)).spread < 1e-9


def test_cocycle_nonconstant_raises():
    a = AbelianAction(C1, 1, lambda s, x: [x[0], x[1], x[2] + s[0] * x[0]])
    with pytest.raises(NonConstant):
        compute_cocycle(a, DB1, sample_points(C1, -1, 1, 20, seed=0))


def test_albert(osc, wave, qtrans):
    assert not albert_condition(osc.cocycle())
    assert not albert_condition(wave.cocycle())
    assert albert_condition(qtrans.cocycle())
    assert albert_condition(Cocycle([1e-12]))


def test_verify_momentum_examples(osc, wave):
    assert verify_momentum(osc.action, osc.structure, osc.momentum, osc.samples(50)).passed
    assert verify_momentum(wave.action, wave.structure, wave.momentum, wave.samples(50)).passed


def test_perturbed_momentum_fails(osc):
    bad = MomentumMap([osc.momentum.components[0] + ScalarField.coordinate(osc.chart, "q1")])
    rep = verify_momentum(osc.action, osc.structure, bad, osc.samples(50))
    assert not rep.passed
    assert rep.metrics["max_abs_residual"] == pytest.approx(1.0)


def test_modify_momentum_matches_displays(osc, wave):
    pts = osc.samples(100, seed=5)
    np.testing.assert_allclose(osc.modified_momentum()(pts)[0], cf.osc_JH(pts), atol=1e-12)
    pts = wave.samples(100, seed=5)
    np.testing.assert_allclose(wave.modified_momentum()(pts)[0], cf.wave_JH(pts), atol=1e-12)


def test_modify_momentum_zero_cocycle(qtrans):
    J = modify_momentum(qtrans.momentum, qtrans.hamiltonian, Cocycle([0.0]))
    assert J.components[0] is qtrans.momentum.components[0]


def test_modified_momentum_against_modified_structure(osc, wave):
    for s in (osc, wave):
        rep = verify_momentum(s.action, s.modified(), s.modified_momentum(), s.samples(100, seed=6))
        assert rep.passed, rep.metrics


def test_non_invariant_hamiltonian_rejected(osc):
    H = ScalarField(osc.chart, lambda x: x[0] ** 2)
    with pytest.raises(NotInvariant):
        modify_momentum(osc.momentum, H, osc.cocycle(), osc.action, osc.samples(10))


def test_noether_witnesses(osc):
    pts = osc.samples(100, seed=7)
    JH = osc.modified_momentum()
    st = osc.structure
    X = st.hamiltonian_field(osc.hamiltonian)
    R = st.reeb_field()
    rep = noether_report(JH, [osc.evolution_field(), X, R], pts, [True, False, False],
                         names=["E_H", "X_H", "R"])
    assert rep.passed, rep.metrics
    np.testing.assert_allclose(derivative_along(X, JH.components[0])(pts), cf.osc_witness(pts), atol=1e-12)
    np.testing.assert_allclose(derivative_along(R, JH.components[0])(pts), -cf.osc_witness(pts), atol=1e-12)


def test_modified_action_oscillator(osc):
    pts = osc.samples(50, seed=8)
    c = osc.cocycle()
    at = modified_action(osc.action, osc.structure, osc.reeb_flow, c, pts)
    assert modified_action_report(osc.action, at, osc.structure, c, pts).passed
    # phi~_s(q, p, t) = (q1 - v s, q2, p, t)
    moved = at([0.7], pts)
    want = pts.copy()
    want[0] -= 0.7
    np.testing.assert_allclose(moved, want, atol=1e-14)
    assert verify_momentum(at, osc.structure, osc.momentum, pts).passed


def test_modified_action_zero_cocycle(qtrans):
    pts = qtrans.samples(20, seed=9)
    at = modified_action(qtrans.action, qtrans.structure, qtrans.reeb_flow, Cocycle([0.0]), pts)
    np.testing.assert_allclose(at([0.3], pts), qtrans.action([0.3], pts), atol=1e-15)


def test_wrong_reeb_flow_rejected(osc):
    def bad(tau, x):
        return [x[0] + tau] + list(x[1:])

    with pytest.raises(FlowMismatch):
        modified_action(osc.action, osc.structure, bad, osc.cocycle(), osc.samples(5))


def test_presym_symmetry_pass(osc, wave):
    for s in (osc, wave):
        rep = check_presym_symmetry(s.action, s.mechanical(), s.samples(50, seed=10))
        assert rep.passed, rep.metrics


def test_presym_symmetry_inside_excluded_set(osc):
    # C: q1 + v t = 0, q2 = 0, p1 = -m v, p2 = 0, where E_H is parallel to xi_M
    t = np.linspace(-1, 1, 4)
    pts = np.stack([-t, 0 * t, -1 + 0 * t, 0 * t, t])
    with pytest.raises(TangencyDetected):
        check_presym_symmetry(osc.action, osc.mechanical(), pts)


def test_presym_symmetry_wave_excluded(wave):
    # C1: cos(q1 - c t) = 0, p1 = m c, p2 = p3 = 0
    t = np.linspace(-1, 1, 3)
    pts = np.stack([t + np.pi / 2, 0 * t, 0 * t, 1 + 0 * t, 0 * t, 0 * t, t])
    with pytest.raises(TangencyDetected):
        check_presym_symmetry(wave.action, wave.mechanical(), pts)
