"""Abelian R^k actions, cocycles, momentum maps and Noether checks."""

from dataclasses import dataclass

import numpy as np

from . import dual as D
from .errors import FlowMismatch, NonConstant, NotInvariant, TangencyDetected
from .fields import (
    SmoothMap, VectorField, coords_of, differential, directional, interior_product_2,
    lie_derivative_2, max_abs, pullback_1form, pullback_2form,
)
from .reports import Report

TOL_ALG = 1e-9
TOL_MOMENTUM = 1e-8
TANGENCY_MARGIN = 1e-6


def _columns(points):
    p = np.asarray(points, dtype=float)
    return p[:, None] if p.ndim == 1 else p.reshape(p.shape[0], -1)


def group_samples(k, n=5, seed=0, scale=2.0):
    rng = np.random.default_rng(seed)
    return scale * (2 * rng.random((n, k)) - 1)


class AbelianAction:
    """Action of ``R^k`` given by ``act(s, coords) -> coords``.

    Fundamental fields default to ``d/ds act(s e_a, x)`` at ``s = 0`` taken
    with dual numbers; closed forms may be supplied instead and are then
    checked by :meth:`consistency_report`.
    """

    def __init__(self, chart, k, act, fundamental=None, label=""):
        self.chart = chart
        self.k = k
        self.act = act
        self.label = label
        if fundamental is None:
            fundamental = [self._derived_field(a) for a in range(k)]
        if len(fundamental) != k:
            raise ValueError(f"need {k} fundamental fields, got {len(fundamental)}")
        self.fundamental_fields = list(fundamental)

    def _derived_field(self, a):
        def fn(x):
            def along(s):
                svec = [0.0] * self.k
                svec[a] = s
                return D.stack(self.act(svec, x))

            return D.derivative(along, 0.0)

        return VectorField(self.chart, fn, f"xi{a + 1}_M")

    def derived_fields(self):
        return [self._derived_field(a) for a in range(self.k)]

    def map_at(self, s):
        s = [float(v) for v in np.atleast_1d(s)]
        return SmoothMap(self.chart, self.chart, lambda x: list(self.act(s, x)), f"phi_{s}")

    def __call__(self, s, x):
        return D.value(self.map_at(s).evaluate(x))

    def consistency_report(self, points, seed=0, n_group=100, tol=TOL_ALG, tol_field=1e-8):
        """Identity, composition law and fundamental-field consistency."""
        pts = _columns(points)
        rng = np.random.default_rng(seed)
        ident = float(np.max(np.abs(self([0.0] * self.k, pts) - pts)))
        comp = 0.0
        for _ in range(n_group):
            s = 2 * rng.random(self.k) - 1
            s2 = 2 * rng.random(self.k) - 1
            j = rng.integers(pts.shape[1])
            x = pts[:, j]
            lhs = self(s, self(s2, x))
            rhs = self(s + s2, x)
            comp = max(comp, float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs)))))
        fdev = 0.0
        for a, f in enumerate(self.fundamental_fields):
            fdev = max(fdev, float(np.max(np.abs(f.evaluate(pts) - self._derived_field(a).evaluate(pts)))))
        ok = ident < tol and comp < tol and fdev < tol_field
        return Report(f"action consistency {self.label}".strip(), ok,
                      {"identity": ident, "composition": comp, "fundamental_field": fdev},
                      {"points": pts.shape[1], "group_samples": n_group}, seed)

    def __repr__(self):
        return f"AbelianAction({self.label}, k={self.k})"


@dataclass(frozen=True)
class Cocycle:
    values: np.ndarray
    spread: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass
class MomentumMap:
    components: list

    @property
    def k(self):
        return len(self.components)

    def __call__(self, x):
        return np.stack([np.asarray(c(x), dtype=float) for c in self.components])

    def evaluate(self, x):
        return [c.evaluate(x) for c in self.components]


def _omega_of(s):
    return s.omega if hasattr(s, "omega") else s


def check_cosymplectic_action(a, s, points, seed=0, n_group=5, tol=TOL_ALG):
    """``phi_s^* omega = omega``, ``phi_s^* eta = eta`` for sampled ``s``; also
    ``L_xi omega = 0`` and ``d(eta(xi)) = 0``."""
    a.chart.check(points)
    pts = _columns(points)
    w0 = s.omega(pts)
    e0 = s.eta(pts)
    dev_w = dev_e = 0.0
    for g in group_samples(a.k, n_group, seed):
        phi = a.map_at(g)
        dev_w = max(dev_w, float(np.max(np.abs(pullback_2form(phi, s.omega)(pts) - w0))))
        dev_e = max(dev_e, float(np.max(np.abs(pullback_1form(phi, s.eta)(pts) - e0))))
    lie = max(max_abs(lie_derivative_2(f, s.omega), pts) for f in a.fundamental_fields)
    dc = max(max_abs(differential(directional(f, s.eta)), pts) for f in a.fundamental_fields)
    ok = max(dev_w, dev_e, lie, dc) < tol
    return Report(f"cosymplectic action {a.label}".strip(), ok,
                  {"pullback_omega": dev_w, "pullback_eta": dev_e, "lie_omega": lie,
                   "d_eta_xi": dc},
                  {"points": pts.shape[1], "group_samples": n_group}, seed)


def compute_cocycle(a, s, points, tol=TOL_ALG):
    """``c_a = eta(xi_a)``, required constant over the samples."""
    pts = _columns(points)
    vals = []
    spread = 0.0
    for f in a.fundamental_fields:
        v = np.asarray(directional(f, s.eta)(pts), dtype=float) + np.zeros(pts.shape[1])
        sp = float(v.max() - v.min())
        if sp > tol:
            raise NonConstant(f"eta(xi_M) varies by {sp:.3e} over the samples")
        spread = max(spread, sp)
        vals.append(float(np.mean(v)))
    return Cocycle(np.array(vals), spread)


def albert_condition(c, tol=TOL_ALG):
    return bool(np.all(np.abs(c.values) < tol))


def verify_momentum(a, s, J, points, seed=None, tol=TOL_MOMENTUM):
    """``i_{xi_a} omega = dJ_a`` at samples; ``s`` is a structure or 2-form."""
    omega = _omega_of(s)
    pts = _columns(points)
    worst = 0.0
    per = []
    for f, Ja in zip(a.fundamental_fields, J.components):
        r = max_abs(interior_product_2(f, omega) - differential(Ja), pts)
        per.append(r)
        worst = max(worst, r)
    return Report("momentum map", worst < tol, {"max_abs_residual": worst, "per_component": per},
                  {"points": pts.shape[1]}, seed)


def invariance_deviation(f, a, points, seed=0, n_group=5):
    """Max of ``|f(phi_s x) - f(x)|`` over sampled group elements."""
    pts = _columns(points)
    base = np.asarray(f.evaluate(pts), dtype=float)
    dev = 0.0
    for g in group_samples(a.k, n_group, seed):
        moved = a(g, pts)
        dev = max(dev, float(np.max(np.abs(np.asarray(f.evaluate(moved)) - base))))
    return dev


def modify_momentum(J, H, c, action=None, points=None, seed=0, tol=TOL_ALG):
    """``(J_H)_a = J_a - c_a H``.  With ``action`` and ``points`` given, the
    invariance of ``H`` is checked first."""
    if action is not None and points is not None:
        dev = invariance_deviation(H, action, points, seed)
        if dev > tol:
            raise NotInvariant(f"Hamiltonian is not invariant under the action (deviation {dev:.3e})")
    comps = []
    for Ja, ca in zip(J.components, c.values):
        if ca == 0.0:
            comps.append(Ja)
        else:
            f = Ja - float(ca) * H
            f.label = f"{Ja.label}-{float(ca):g}*{H.label}"
            comps.append(f)
    return MomentumMap(comps)


def noether_report(J, fields, points, expect_zero=None, seed=None, tol=TOL_MOMENTUM, names=None):
    """Max ``|dJ_a(V)|`` for every component and field.

    ``expect_zero[i]`` states whether field ``i`` should conserve ``J``.
    """
    pts = _columns(points)
    names = names or [f.label for f in fields]
    if expect_zero is None:
        expect_zero = [True] * len(fields)
    metrics = {}
    ok = True
    for Ja_i, Ja in enumerate(J.components):
        dJ = differential(Ja)
        for name, V, zero in zip(names, fields, expect_zero):
            val = max_abs(directional(V, dJ), pts)
            metrics[f"J{Ja_i + 1}:{name}"] = val
            ok = ok and ((val < tol) if zero else (val >= tol))
    return Report("noether", ok, metrics,
                  {"points": pts.shape[1], "expect_zero": dict(zip(names, expect_zero))}, seed)


def derivative_along(V, f):
    """Scalar field ``V(f)``."""
    return directional(V, differential(f))


def check_reeb_flow(flow, R, points, taus=(-0.7, 0.0, 0.4, 1.3), tol=1e-8):
    """``d/dtau Phi_tau(x) = R(Phi_tau(x))`` and ``Phi_0 = id`` at samples."""
    pts = _columns(points)
    worst = float(np.max(np.abs(D.value(D.stack(flow(0.0, coords_of(pts)))) - pts)))
    for tau in taus:
        def path(t):
            return D.stack(flow(t, coords_of(pts)))

        dphi = D.value(D.derivative(path, float(tau)))
        at = D.value(path(float(tau)))
        worst = max(worst, float(np.max(np.abs(dphi - R.evaluate(at)))))
    if worst > tol:
        raise FlowMismatch(f"supplied Reeb flow deviates from the Reeb field by {worst:.3e}")
    return worst


def modified_action(a, s, reeb_flow, cocycle, points=None):
    """``phi~_s = Phi^R_{-c.s} o phi_s``; removes the cocycle of an action.

    ``reeb_flow(tau, coords)`` is the closed-form flow of the Reeb field.
    """
    R = s.reeb_field()
    if points is not None:
        check_reeb_flow(reeb_flow, R, points)
    c = [float(v) for v in cocycle.values]

    def act(svec, x):
        tau = 0.0
        for ca, sa in zip(c, svec):
            tau = tau - ca * sa
        return list(reeb_flow(tau, a.act(svec, x)))

    return AbelianAction(a.chart, a.k, act, label=f"{a.label}~")


def modified_action_report(a, at, s, cocycle, points, seed=None, tol=1e-8):
    """``eta(xi~) = 0`` and ``xi~ = xi - c R`` at samples."""
    pts = _columns(points)
    R = s.reeb_field()
    eta_dev = field_dev = 0.0
    for ca, f, ft in zip(cocycle.values, a.fundamental_fields, at.fundamental_fields):
        eta_dev = max(eta_dev, max_abs(directional(ft, s.eta), pts))
        field_dev = max(field_dev, max_abs(ft - (f - float(ca) * R), pts))
    return Report("modified action", eta_dev < tol and field_dev < tol,
                  {"max_abs_eta_xi_tilde": eta_dev, "max_abs_field_deviation": field_dev},
                  {"points": pts.shape[1]}, seed)


def tangency_distance(a, reeb, points):
    """Relative distance from ``R(x)`` to ``span{xi_a(x)}`` at each point."""
    pts = _columns(points)
    R = np.asarray(reeb.evaluate(pts), dtype=float) + np.zeros(pts.shape)
    X = np.stack([np.asarray(f.evaluate(pts), dtype=float) + np.zeros(pts.shape)
                  for f in a.fundamental_fields])  # (k, n, B)
    out = np.empty(pts.shape[1])
    for j in range(pts.shape[1]):
        A = X[:, :, j].T
        r = R[:, j]
        coef, *_ = np.linalg.lstsq(A, r, rcond=None)
        out[j] = np.linalg.norm(r - A @ coef) / max(np.linalg.norm(r), 1e-300)
    return out


def check_presym_symmetry(a, m, points, seed=0, n_group=5, tol=TOL_ALG, margin=TANGENCY_MARGIN):
    """Symmetry of a mechanical presymplectic structure ``(omega, R)``.

    (i) ``phi_s^* omega = omega`` and ``T phi_s R = R o phi_s``;
    (ii) ``R(x)`` stays off the orbit tangent space.  Points violating (ii)
    raise :class:`TangencyDetected`.  The chart guard is deliberately not
    applied so excluded sets can be probed.
    """
    pts = _columns(points)
    dist = tangency_distance(a, m.reeb, pts)
    bad = dist < margin
    if np.any(bad):
        raise TangencyDetected(f"Reeb field tangent to the orbit at {int(bad.sum())} point(s)",
                               points=pts[:, bad].T.tolist())
    w0 = D.value(m.omega.evaluate(pts))
    dev_w = dev_r = 0.0
    for g in group_samples(a.k, n_group, seed):
        phi = a.map_at(g)
        dev_w = max(dev_w, float(np.max(np.abs(D.value(pullback_2form(phi, m.omega).evaluate(pts)) - w0))))
        jac = D.value(phi.jacobian(pts))  # (a, i, B)
        push = np.einsum("ai...,a...->i...", jac, D.value(m.reeb.evaluate(pts)))
        moved = D.value(m.reeb.evaluate(D.value(phi.evaluate(pts))))
        dev_r = max(dev_r, float(np.max(np.abs(push - moved))))
    ok = dev_w < tol and dev_r < tol
    return Report(f"presymplectic symmetry {a.label}".strip(), ok,
                  {"pullback_omega": dev_w, "pushforward_reeb": dev_r,
                   "min_tangency_distance": float(dist.min())},
                  {"points": pts.shape[1], "group_samples": n_group}, seed)


__all__ = [
    "AbelianAction", "Cocycle", "MomentumMap", "check_cosymplectic_action", "compute_cocycle",
    "albert_condition", "verify_momentum", "modify_momentum", "noether_report",
    "modified_action", "modified_action_report", "check_presym_symmetry", "check_reeb_flow",
    "tangency_distance", "invariance_deviation", "derivative_along", "group_samples",
]
