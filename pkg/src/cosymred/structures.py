"""Cosymplectic and mechanical presymplectic structures.

The musical map ``flat(X) = i_X omega + eta(X) eta`` has matrix
``F = Omega^T + eta eta^T`` in the chart basis.  Everything that needs a
pointwise solve (Reeb field, Hamiltonian field) goes through ``F``; the solve
is dual-aware so the resulting vector fields can be differentiated again.
"""

from dataclasses import dataclass, field

import numpy as np

from . import dual as D
from .errors import SingularFlat
from .fields import (
    CoordinateChart, OneFormField, ScalarField, SmoothMap, TwoFormField, VectorField,
    closedness_check, darboux_chart, differential, directional,
    exterior_derivative, fd_lie_derivative_1, fd_lie_derivative_2, interior_product_2,
    lie_derivative_1, lie_derivative_2, max_abs, pullback_2form, wedge_1_1,
)
from .linalg import Subspace, kernel
from .reports import Report

COND_MAX = 1e12
TOL_REEB = 1e-8
TOL_CLOSED = 1e-9
TOL_KERNEL = 1e-8


def _flat_darray(omega, eta):
    sw = D.linear(lambda a: np.swapaxes(a, 0, 1), omega)
    return sw + D.einsum("i...,j...->ij...", eta, eta)


def _solve(a, b):
    try:
        return D.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularFlat(f"flat matrix is singular: {exc}") from None


class CosymplecticStructure:
    """Pair ``(omega, eta)``; validity is checked on samples, not assumed."""

    def __init__(self, omega, eta, label=""):
        omega._same_chart(eta)
        self.chart = omega.chart
        self.omega = omega
        self.eta = eta
        self.label = label

    @classmethod
    def darboux(cls, chart):
        """``sum dq^i ^ dp_i`` and ``dt`` on a chart named ``q1..qn, p1..pn, t``."""
        n = (chart.dim - 1) // 2
        omega = TwoFormField.from_terms(chart, [(f"q{i}", f"p{i}", 1.0) for i in range(1, n + 1)],
                                        "dq^dp")
        return cls(omega, OneFormField.coordinate(chart, "t"), "darboux")

    def flat_darray(self, x):
        return _flat_darray(self.omega.evaluate(x), self.eta.evaluate(x))

    def flat_matrix(self, x):
        """Matrix of ``flat`` at a single point."""
        self.chart.check(x)
        f = D.value(self.flat_darray(x))
        c = np.linalg.cond(f)
        if not np.isfinite(c) or c > COND_MAX:
            raise SingularFlat(f"flat matrix condition number {c:.3e} exceeds {COND_MAX:.0e}")
        return f

    def sharp(self, alpha_x, x):
        """``flat^{-1}`` applied to covector components at ``x``."""
        return _solve(self.flat_darray(x), alpha_x)

    def reeb_field(self):
        def fn(x):
            return _solve(self.flat_darray(x), self.eta.evaluate(x))

        return VectorField(self.chart, fn, f"R[{self.label}]")

    def reeb_residual(self, points):
        """Max residual of the stacked system ``[Omega^T; eta^T] R = (0, 1)``."""
        R = self.reeb_field()(points)
        w = self.omega(points)
        e = self.eta(points)
        r1 = np.einsum("i...,ij...->j...", R, w)
        r2 = np.einsum("i...,i...->...", R, e) - 1.0
        return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))

    def hamiltonian_field(self, H):
        """``X_H`` from ``i_X omega = dH - R(H) eta``, ``eta(X) = 0``."""
        dH = differential(H)

        def fn(x):
            f = self.flat_darray(x)
            eta = self.eta.evaluate(x)
            r = _solve(f, eta)
            dh = dH.evaluate(x)
            rh = D.einsum("i...,i...->...", r, dh)
            return _solve(f, dh - rh * eta)

        return VectorField(self.chart, fn, f"X_{H.label}")

    def evolution_field(self, H):
        """``E_H = X_H + R``, sharing one factorisation per evaluation."""
        dH = differential(H)

        def fn(x):
            f = self.flat_darray(x)
            eta = self.eta.evaluate(x)
            r = _solve(f, eta)
            dh = dH.evaluate(x)
            rh = D.einsum("i...,i...->...", r, dh)
            return _solve(f, dh - rh * eta) + r

        return VectorField(self.chart, fn, f"E_{H.label}")

    def modify(self, H):
        """``(omega + dH ^ eta, eta)``."""
        om = self.omega + wedge_1_1(differential(H), self.eta)
        om.label = f"{self.omega.label}+d{H.label}^{self.eta.label}"
        return CosymplecticStructure(om, self.eta, f"{self.label}_{H.label}")

    def as_mechanical(self):
        return MechanicalPresymplecticStructure(self.omega, self.reeb_field(), self.label)

    def validate(self, points, seed=None, tol_closed=TOL_CLOSED):
        return validate_cosymplectic(self, points, seed=seed, tol_closed=tol_closed)

    def __repr__(self):
        return f"CosymplecticStructure({self.label})"


def modify_structure(s, H):
    return s.modify(H)


def reeb_field(s):
    return s.reeb_field()


def hamiltonian_field(s, H):
    return s.hamiltonian_field(H)


def evolution_field(s, H):
    return s.evolution_field(H)


def as_mechanical(s):
    return s.as_mechanical()


def flat_matrix(s, x):
    return s.flat_matrix(x)


def validate_cosymplectic(s, points, seed=None, tol_closed=TOL_CLOSED):
    s.chart.check(points)
    dw = closedness_check(s.omega, points, tol_closed).metrics["max_abs_domega"]
    deta = max_abs(exterior_derivative(s.eta), points)
    f = D.value(s.flat_darray(points))
    fm = np.moveaxis(f.reshape(f.shape[0], f.shape[1], -1), -1, 0)
    dets = np.abs(np.linalg.det(fm))
    conds = np.linalg.cond(fm)
    min_det = float(dets.min())
    max_cond = float(np.max(np.where(np.isfinite(conds), conds, np.inf)))
    odd = s.chart.dim % 2 == 1
    ok = odd and dw < tol_closed and deta < tol_closed and max_cond <= COND_MAX
    return Report(f"validate cosymplectic {s.label}".strip(), ok,
                  {"max_abs_domega": dw, "max_abs_deta": deta,
                   "min_abs_det_flat": min_det, "max_cond_flat": max_cond},
                  {"points": fm.shape[0], "odd_dimension": odd}, seed)


class MechanicalPresymplecticStructure:
    """Closed corank-one ``omega`` with a field ``reeb`` spanning its kernel."""

    def __init__(self, omega, reeb, label=""):
        omega._same_chart(reeb)
        self.chart = omega.chart
        self.omega = omega
        self.reeb = reeb
        self.label = label

    def kernel_report(self, points, seed=None, tol=TOL_KERNEL):
        return kernel_spanned_report(self.omega, self.reeb, points, f"kernel {self.label}", seed, tol)

    def validate(self, points, seed=None, tol_closed=TOL_CLOSED):
        self.chart.check(points)
        dw = closedness_check(self.omega, points, tol_closed).metrics["max_abs_domega"]
        kr = self.kernel_report(points, seed)
        ok = dw < tol_closed and kr.passed
        m = dict(kr.metrics)
        m["max_abs_domega"] = dw
        return Report(f"validate mechanical presymplectic {self.label}".strip(), ok, m,
                      kr.details, seed)

    def __repr__(self):
        return f"MechanicalPresymplecticStructure({self.label})"


def _columns(points):
    p = np.asarray(points, dtype=float)
    return p[:, None] if p.ndim == 1 else p.reshape(p.shape[0], -1)


def kernel_spanned_report(omega, reeb, points, name="kernel", seed=None, tol=TOL_KERNEL):
    """At each point: ``ker omega(x)`` is one-dimensional and equals
    ``span{reeb(x)}``; ``reeb(x) != 0``; ``omega(reeb, .) ~ 0``."""
    from .linalg import AntisymmetricForm

    pts = _columns(points)
    W = omega(pts)
    R = reeb(pts)
    worst_dist = 0.0
    worst_contr = 0.0
    min_norm = np.inf
    dims = set()
    for k in range(pts.shape[1]):
        w = AntisymmetricForm(W[..., k], tol=1e-10)
        r = R[:, k]
        ker = kernel(w)
        dims.add(ker.dim)
        nr = float(np.linalg.norm(r))
        min_norm = min(min_norm, nr)
        if ker.dim == 1 and nr > 0:
            worst_dist = max(worst_dist, ker.distance(Subspace.span([r])))
        else:
            worst_dist = np.inf
        worst_contr = max(worst_contr, float(np.max(np.abs(r @ W[..., k]))))
    ok = dims == {1} and worst_dist < tol and worst_contr < tol and min_norm > 0
    return Report(name, ok, {"max_projector_distance": worst_dist,
                             "max_abs_i_R_omega": worst_contr, "min_norm_reeb": min_norm},
                  {"kernel_dims": sorted(dims), "points": pts.shape[1]}, seed)


# ------------------------------------------------------- lie derivative checks

def reeb_invariance_report(s, points, seed=None, tol=1e-9, fd_tol=1e-5):
    """``L_R omega = 0`` and ``L_R eta = 0`` by the exact coordinate formula
    and by the flow finite-difference route."""
    R = s.reeb_field()
    pts = _columns(points)
    exact = max(max_abs(lie_derivative_2(R, s.omega), pts), max_abs(lie_derivative_1(R, s.eta), pts))
    fd = 0.0
    for k in range(min(pts.shape[1], 20)):
        x = pts[:, k]
        fd = max(fd, float(np.max(np.abs(fd_lie_derivative_2(R, s.omega, x)))),
                 float(np.max(np.abs(fd_lie_derivative_1(R, s.eta, x)))))
    cartan = max(max_abs(interior_product_2(R, s.omega), pts),
                 max_abs(directional(R, s.eta) - 1.0, pts))
    return Report(f"reeb invariance {s.label}".strip(), exact < tol and fd < fd_tol,
                  {"max_abs_LR_exact": exact, "max_abs_LR_fd": fd, "max_abs_reeb_conditions": cartan},
                  {"points": pts.shape[1]}, seed)


def hamiltonian_lie_report(s, H, points, seed=None, tol=1e-9, fd_tol=1e-5):
    """``L_{X_H} omega = -d(R(H)) ^ eta`` at samples."""
    X = s.hamiltonian_field(H)
    R = s.reeb_field()
    rhs = -wedge_1_1(differential(R.apply(H)), s.eta)
    pts = _columns(points)
    exact = max_abs(lie_derivative_2(X, s.omega) - rhs, pts)
    fd = 0.0
    for k in range(min(pts.shape[1], 20)):
        x = pts[:, k]
        fd = max(fd, float(np.max(np.abs(fd_lie_derivative_2(X, s.omega, x) - rhs(x)))))
    return Report(f"L_X omega identity {H.label}".strip(), exact < tol and fd < fd_tol,
                  {"max_abs_residual_exact": exact, "max_abs_residual_fd": fd},
                  {"points": pts.shape[1]}, seed)


# ------------------------------------------------------------- formalisms

@dataclass
class HamiltonianSectionData:
    """Hamiltonian section on the coordinates ``(q1..qn, p1..pn, t)``.

    ``H_h`` and the connection components ``Y[i]`` are closures over the
    coordinate list; ``Y[i]`` should depend on ``q`` and ``t`` only.
    """

    n: int
    H_h: object
    Y: list | None = None
    label: str = "H_h"
    chart: CoordinateChart = field(init=False)

    def __post_init__(self):
        self.chart = darboux_chart(self.n)
        if self.Y is not None and len(self.Y) != self.n:
            raise ValueError(f"connection needs {self.n} components, got {len(self.Y)}")

    def hamiltonian(self):
        return ScalarField(self.chart, self.H_h, self.label)


def _extended_chart(n):
    names = ([f"q{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)]
             + ["t", "pt"])
    return CoordinateChart(names)


def build_reeb_formalism(d):
    """``(h* omega_Q, dt)`` with ``h(q, p, t) = (q, p, t, -H_h)`` and
    ``omega_Q = dq ^ dp + dt ^ dp_t``."""
    n = d.n
    ext = _extended_chart(n)
    omega_q = TwoFormField.from_terms(
        ext, [(f"q{i}", f"p{i}", 1.0) for i in range(1, n + 1)] + [("t", "pt", 1.0)], "omega_Q")
    h = SmoothMap(d.chart, ext, lambda x: list(x) + [-d.H_h(x)], "h")
    omega_h = pullback_2form(h, omega_q)
    omega_h.label = "omega_h"
    return CosymplecticStructure(omega_h, OneFormField.coordinate(d.chart, "t"), "reeb-formalism")


def liouville_Y(d):
    """``lambda_Y = p_i dq^i - Y^i p_i dt``."""
    if d.Y is None:
        raise ValueError("evolution formalism needs a connection Y")
    n = d.n

    def fn(x):
        p = x[n:2 * n]
        comps = [p[i] for i in range(n)] + [0.0] * n
        yp = 0.0
        for i in range(n):
            yp = yp + d.Y[i](x) * p[i]
        return comps + [-yp]

    return OneFormField(d.chart, fn, "lambda_Y")


def evolution_hamiltonian(d):
    """``H^Y = -Y^i p_i + H_h``."""
    n = d.n

    def fn(x):
        out = d.H_h(x)
        for i in range(n):
            out = out - d.Y[i](x) * x[n + i]
        return out

    return ScalarField(d.chart, fn, "H^Y")


def build_evolution_formalism(d):
    omega_y = -exterior_derivative(liouville_Y(d))
    omega_y.label = "omega_Y"
    s = CosymplecticStructure(omega_y, OneFormField.coordinate(d.chart, "t"), "evolution-formalism")
    return s, evolution_hamiltonian(d)


def reeb_formalism_field(d):
    """Closed form ``d_t + dH/dp d_q - dH/dq d_p``."""
    n = d.n
    dH = differential(d.hamiltonian())

    def fn(x):
        g = dH.evaluate(x)
        return [g[n + i] for i in range(n)] + [-g[i] for i in range(n)] + [1.0]

    return VectorField(d.chart, fn, "R_h")


def formalism_relation_check(d, points, seed=None, tol=1e-9):
    """Max of ``|omega_h - omega_Y - dH^Y ^ dt|`` over samples."""
    sh = build_reeb_formalism(d)
    sy, hy = build_evolution_formalism(d)
    diff = sh.omega - sy.omega - wedge_1_1(differential(hy), sy.eta)
    worst = max_abs(diff, points)
    return Report(f"formalism relation {d.label}", worst < tol, {"max_abs_deviation": worst, "tol": tol},
                  {"points": _columns(points).shape[1]}, seed)


def hamilton_equations_residual(d, traj):
    """Residual of ``dq/dt = H_p, dp/dt = -H_q`` along a trajectory of ``R_h``
    sampled on a uniform grid; derivatives from a fourth-order stencil."""
    n = d.n
    x = np.asarray(traj.states)
    tau = np.asarray(traj.times)
    if len(tau) < 5:
        return 0.0
    h = tau[1] - tau[0]
    xd = (x[:-4] - 8 * x[1:-3] + 8 * x[3:-1] - x[4:]) / (12 * h)
    mid = x[2:-2].T
    g = differential(d.hamiltonian())(mid)
    res_q = xd[:, :n].T - g[n:2 * n]
    res_p = xd[:, n:2 * n].T + g[:n]
    res_t = xd[:, 2 * n] - 1.0
    return float(max(np.max(np.abs(res_q)), np.max(np.abs(res_p)), np.max(np.abs(res_t))))


__all__ = [
    "CosymplecticStructure", "MechanicalPresymplecticStructure", "HamiltonianSectionData",
    "validate_cosymplectic", "flat_matrix", "reeb_field", "hamiltonian_field", "evolution_field",
    "modify_structure", "as_mechanical", "build_reeb_formalism", "build_evolution_formalism",
    "formalism_relation_check", "kernel_spanned_report", "reeb_invariance_report",
    "hamiltonian_lie_report", "hamilton_equations_residual", "liouville_Y", "evolution_hamiltonian",
    "reeb_formalism_field",
]
