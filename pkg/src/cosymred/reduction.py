"""Level sets, pointwise perp diagnostics and slice-based reduction.

A reduction scenario supplies a *slice*: a chart on a hyperplane section of
the ambient chart, an embedding into the ambient chart and the residuals
cutting out that section.  The reduced manifold is realised as the constraint
set ``{y : J(embed(y)) = mu}`` inside the slice chart, and ``M_mu`` is
identified with it through ``(s, y) -> act(s, embed(y))``.
"""

from dataclasses import dataclass

import numpy as np

from . import dual as D
from .errors import (
    DomainGuardViolation, EmptyLevelSet, InvariantError, NoConvergence, RankDeficient,
    SliceNotTransverse,
)
from .fields import (
    CoordinateChart, ScalarField, SmoothMap, TwoFormField, VectorField, coords_of,
    exterior_derivative_2, pullback_1form, pullback_2form, sample_points,
)
from .integrate import RunConfig, rk4_integrate
from .linalg import AntisymmetricForm, Subspace, _perp, kernel, nullspace, subspace_sum
from .reports import Report
from .structures import kernel_spanned_report

NEWTON_TOL = 1e-11
NEWTON_MAXIT = 50
STEP_TOL = 1e-10
REGULARITY_MIN = 1e-6
COND_SPLIT = 1e10
TOL_PERP = 1e-7
TOL_REDUCED = 1e-8


def _columns(points):
    p = np.asarray(points, dtype=float)
    return p[:, None] if p.ndim == 1 else p.reshape(p.shape[0], -1)


# ------------------------------------------------------------------- newton

def newton_project(g, x0, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
    """Minimum-norm Newton for ``g(x) = 0`` at one point.

    ``g`` maps coordinate lists to a list of ``k`` residuals.  Steps move in
    the row space of ``Dg``.
    """
    x = np.array(x0, dtype=float)

    def gv(c):
        return D.stack(g(c))

    for _ in range(maxit + 1):
        r = np.asarray(D.value(gv(x.tolist())), dtype=float)
        if not np.all(np.isfinite(r)):
            raise NoConvergence("non-finite constraint value during projection")
        A = np.asarray(D.value(D.jacobian(gv, x.tolist())), dtype=float).T  # (k, n)
        sv = np.linalg.svd(A, compute_uv=False)
        scale = max(1.0, float(np.max(np.abs(x))))
        if sv[-1] <= 1e-12 * max(1.0, sv[0]):
            raise RankDeficient("constraint differentials are dependent at the iterate")
        step = A.T @ np.linalg.solve(A @ A.T, r)
        # a tiny residual is not enough near a critical point of the
        # constraint, where it shrinks quadratically while x is still far off
        if np.max(np.abs(r)) < tol and np.linalg.norm(step) < STEP_TOL * scale:
            if sv[-1] < REGULARITY_MIN * scale:
                raise RankDeficient(f"level set not regular at the limit point (sigma_min {sv[-1]:.2e})")
            return x
        x = x - step
    raise NoConvergence(f"projection did not converge in {maxit} iterations")


# ----------------------------------------------------------------- level sets

class LevelSet:
    """``J^{-1}(mu)`` for a momentum map on a mechanical presymplectic manifold."""

    def __init__(self, structure, J, mu, empty_hook=None):
        self.structure = structure
        self.chart = structure.chart
        self.J = J
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if self.mu.shape != (J.k,):
            raise ValueError(f"mu must have {J.k} components")
        self.empty_hook = empty_hook

    def residuals(self, c):
        return [Ja.evaluate(c) - float(m) for Ja, m in zip(self.J.components, self.mu)]

    def residual(self, x):
        return np.stack([np.asarray(D.value(r), dtype=float) for r in self.residuals(coords_of(x))])

    def tangent_space(self, x):
        """``ker dJ(x)`` as a subspace of the ambient tangent space."""
        dJ = np.stack([np.asarray(D.value(D.jacobian(Ja.evaluate, x)), dtype=float)
                       for Ja in self.J.components])
        return nullspace(dJ)

    def project(self, x0, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
        return newton_project(self.residuals, x0, tol, maxit)

    def sample(self, lower, upper, n=50, seed=0, seeds_max=None):
        """``n`` guarded points on the level set from box seeds projected by
        Newton.  Raises :class:`EmptyLevelSet` when nothing is found."""
        rng = np.random.default_rng(seed)
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (self.chart.dim,))
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (self.chart.dim,))
        seeds_max = seeds_max or max(100, 4 * n)
        out = []
        tried = 0
        while len(out) < n and tried < seeds_max:
            tried += 1
            x0 = lower + (upper - lower) * rng.random(self.chart.dim)
            try:
                x = self.project(x0)
            except (NoConvergence, RankDeficient, np.linalg.LinAlgError):
                continue
            if self.chart.allowed(x):
                out.append(x)
        why = self.empty_hook(self.mu) if self.empty_hook is not None else ""
        if not out:
            reason = "newton failure from all seeds" + (f"; analytic bound: {why}" if why else "")
            raise EmptyLevelSet(
                f"no point of the level set mu={self.mu.tolist()} found from {tried} seeds",
                mu=self.mu.tolist(), reason=reason)
        if why:
            raise InvariantError(f"analytic bound says the level set is empty ({why}) "
                                 f"but {len(out)} points were found")
        if len(out) < n:
            raise NoConvergence(f"only {len(out)} of {n} level-set points found")
        return np.stack(out, axis=1)


def project_to_level(x0, L):
    return L.project(x0)


def tangent_perp_report(L, a, x, tol=TOL_PERP):
    """``(T_x level)^perp = span{xi} + span{R}`` and
    ``ker(iota^* omega)(x) = span{xi, R}``."""
    x = np.asarray(x, dtype=float)
    w = AntisymmetricForm(L.structure.omega(x), tol=1e-10)
    tl = L.tangent_space(x)
    r = np.asarray(L.structure.reeb(x), dtype=float)
    xis = [np.asarray(f(x), dtype=float) for f in a.fundamental_fields]
    target = subspace_sum(Subspace.span(xis, ambient=x.size), Subspace.span([r]))
    tp = _perp(w, tl)
    d_perp = tp.distance(target) if tp.dim == target.dim else np.inf
    # kernel of the restricted form, pushed back into the ambient space
    wr = AntisymmetricForm(tl.basis.T @ w.matrix @ tl.basis, tol=1e-10)
    kr = kernel(wr)
    kamb = Subspace.span(list((tl.basis @ kr.basis).T), ambient=x.size)
    d_ker = kamb.distance(target) if kamb.dim == target.dim else np.inf
    ok = d_perp < tol and d_ker < tol
    return Report("tangent perp", ok,
                  {"perp_distance": d_perp, "kernel_distance": d_ker},
                  {"perp_dim": tp.dim, "kernel_dim": kamb.dim, "target_dim": target.dim})


def tangent_perp_batch(L, a, points, tol=TOL_PERP, seed=None):
    pts = _columns(points)
    worst_p = worst_k = 0.0
    dims = set()
    for j in range(pts.shape[1]):
        rep = tangent_perp_report(L, a, pts[:, j], tol)
        worst_p = max(worst_p, rep.metrics["perp_distance"])
        worst_k = max(worst_k, rep.metrics["kernel_distance"])
        dims.add(rep.details["kernel_dim"])
    ok = worst_p < tol and worst_k < tol
    return Report("tangent perp", ok, {"max_perp_distance": worst_p, "max_kernel_distance": worst_k},
                  {"points": pts.shape[1], "kernel_dims": sorted(dims)}, seed)


# --------------------------------------------------------------------- slices

class SliceChart:
    """Hyperplane section of the ambient chart used as a global slice.

    ``section(coords)`` returns the ``k`` residuals cutting the section out of
    the ambient chart; ``embed`` maps slice coordinates into it; ``coords``
    maps ambient points of the section back to slice coordinates (defaults to
    picking coordinates by name).
    """

    def __init__(self, chart, ambient, embed, section, action, coords=None, quotient=None):
        self.chart = chart
        self.ambient = ambient
        self.embed = SmoothMap(chart, ambient, embed, "embed") if callable(embed) else embed
        self.section = section
        self.action = action
        if coords is None:
            idx = [ambient.index(nm) for nm in chart.names]
            coords = lambda x: [x[i] for i in idx]  # noqa: E731
        self.coords = coords
        if quotient is None:
            quotient = lambda s, y: action.act(s, self.embed.components(y))  # noqa: E731
        self.quotient = quotient

    @property
    def k(self):
        return self.action.k

    def to_slice(self, x, tol=1e-13, maxit=NEWTON_MAXIT):
        """``(s, y)`` with ``act(s, embed(y)) = x`` for a batch of points.

        Solves ``section(act(-s, x)) = 0`` for ``s`` by Newton, vectorised
        over the batch.
        """
        pts = _columns(x)
        xs = coords_of(pts)
        k = self.k
        s = np.zeros((k, pts.shape[1]))

        def g(sv):
            neg = [-v for v in sv]
            return D.stack(self.section(self.action.act(neg, xs)))

        for _ in range(maxit + 1):
            r = np.asarray(D.value(g(list(s))), dtype=float).reshape(k, -1)
            if np.max(np.abs(r)) <= tol * max(1.0, float(np.max(np.abs(pts)))):
                break
            J = np.asarray(D.value(D.jacobian(g, list(s))), dtype=float).reshape(k, k, -1)
            Jm = np.moveaxis(J, -1, 0).transpose(0, 2, 1)  # (B, residual, param)
            try:
                ds = np.linalg.solve(Jm, np.moveaxis(r, -1, 0)[..., None])[..., 0]
            except np.linalg.LinAlgError:
                raise NoConvergence("group-parameter solve is singular") from None
            s = s - ds.T
        else:
            raise NoConvergence("group-parameter solve did not converge")
        back = self.action.act([-v for v in s], xs)
        y = np.stack([np.asarray(D.value(c), dtype=float) + np.zeros(pts.shape[1])
                      for c in self.coords(back)])
        return s, y

    def quotient_map(self):
        """``(s, y) -> act(s, embed(y))`` as a map on ``R^k x slice``."""
        names = [f"s{a + 1}" for a in range(self.k)] + list(self.chart.names)
        src = CoordinateChart(names)
        k = self.k
        return SmoothMap(src, self.ambient, lambda c: list(self.quotient(c[:k], c[k:])), "psi")

    def level_residuals(self, L):
        return lambda y: L.residuals(self.embed.components(y))

    def sample(self, L, lower, upper, n=100, seed=0, seeds_max=None):
        """``n`` points of the reduced manifold (slice coordinates)."""
        rng = np.random.default_rng(seed)
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (self.chart.dim,))
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (self.chart.dim,))
        g = self.level_residuals(L)
        seeds_max = seeds_max or max(100, 4 * n)
        out = []
        tried = 0
        while len(out) < n and tried < seeds_max:
            tried += 1
            y0 = lower + (upper - lower) * rng.random(self.chart.dim)
            try:
                y = newton_project(g, y0)
            except (NoConvergence, RankDeficient, np.linalg.LinAlgError):
                continue
            if self.ambient.allowed(self.embed(y)) and self.chart.allowed(y):
                out.append(y)
        if not out:
            raise EmptyLevelSet(f"no slice point on level mu={L.mu.tolist()} from {tried} seeds",
                                mu=L.mu.tolist(), reason="newton failure from all seeds")
        if len(out) < n:
            raise NoConvergence(f"only {len(out)} of {n} slice points found")
        return np.stack(out, axis=1)

    def invariants_report(self, L, points, seed=None, tol=1e-8):
        """``embed`` lands on the section and level; the quotient map is
        equivariant."""
        pts = _columns(points)
        amb = D.value(self.embed.evaluate(pts))
        sec = float(np.max(np.abs(np.asarray(D.value(D.stack(self.section(coords_of(amb))))))))
        lev = float(np.max(np.abs(L.residual(amb))))
        rng = np.random.default_rng(0 if seed is None else seed)
        psi = self.quotient_map()
        eq = 0.0
        for _ in range(5):
            s = 2 * rng.random(self.k) - 1
            s2 = 2 * rng.random(self.k) - 1
            lhs = D.value(psi.evaluate(np.vstack([np.repeat((s + s2)[:, None], pts.shape[1], 1), pts])))
            inner = D.value(psi.evaluate(np.vstack([np.repeat(s2[:, None], pts.shape[1], 1), pts])))
            rhs = self.action(s, inner)
            eq = max(eq, float(np.max(np.abs(lhs - rhs))))
        ok = sec < tol and lev < tol and eq < tol
        return Report("slice invariants", ok, {"section_residual": sec, "level_residual": lev,
                                               "equivariance": eq}, {"points": pts.shape[1]}, seed)


# ------------------------------------------------------------------ reduction

@dataclass
class ReducedStructure:
    slice: SliceChart
    level: LevelSet
    omega_mu: TwoFormField
    reeb_mu: VectorField
    eta_mu: object = None

    def tangent_basis(self, y):
        """Basis of ``T_y N`` inside the slice chart."""
        g = self.slice.level_residuals(self.level)
        A = np.asarray(D.value(D.jacobian(lambda c: D.stack(g(c)), list(np.asarray(y, dtype=float)))))
        return nullspace(A.T)

    def kernel_report(self, points, seed=None, tol=TOL_REDUCED):
        """Closedness, ``rank = dim N - 1`` and ``omega_mu(R_mu, .) = 0`` on ``T N``."""
        pts = _columns(points)
        W = self.omega_mu(pts)
        R = self.reeb_mu(pts)
        d3 = float(np.max(np.abs(exterior_derivative_2(self.omega_mu)(pts))))
        worst_dist = worst_contr = worst_tan = 0.0
        dims = set()
        for j in range(pts.shape[1]):
            tb = self.tangent_basis(pts[:, j]).basis
            r = R[:, j]
            worst_tan = max(worst_tan, float(np.linalg.norm(r - tb @ (tb.T @ r))))
            wr = AntisymmetricForm(tb.T @ W[..., j] @ tb, tol=1e-10)
            ker = kernel(wr)
            dims.add(ker.dim)
            rr = tb.T @ r
            if ker.dim == 1:
                worst_dist = max(worst_dist, ker.distance(Subspace.span([rr])))
            else:
                worst_dist = np.inf
            worst_contr = max(worst_contr, float(np.max(np.abs(rr @ wr.matrix))))
        ok = dims == {1} and max(worst_dist, worst_contr, worst_tan, d3) < tol
        return Report("reduced kernel", ok,
                      {"max_projector_distance": worst_dist, "max_abs_i_R_omega": worst_contr,
                       "max_reeb_normal_component": worst_tan, "max_abs_domega": d3},
                      {"kernel_dims": sorted(dims), "points": pts.shape[1]}, seed)


def reduced_reeb(L, a, sl):
    """Slice part of ``R(embed(y))`` in the split ``[xi | D embed]``."""
    R = L.structure.reeb
    k = a.k

    def fn(y):
        amb = sl.embed.components(y)
        ra = R.evaluate(amb)
        jac = sl.embed.jacobian(y)  # (slice, ambient, B)
        cols = [f.evaluate(amb) for f in a.fundamental_fields]
        xi = D.stack(cols, axis=1, shape=D.full_shape(ra))  # (ambient, k, B)
        emb = D.linear(lambda t: np.swapaxes(t, 0, 1), jac)  # (ambient, slice, B)
        split = D.linear(lambda u, v: np.concatenate([np.broadcast_to(u, u.shape[:2] + v.shape[2:]),
                                                      np.broadcast_to(v, v.shape[:2] + u.shape[2:])],
                                                     axis=1), xi, emb)
        m = np.asarray(D.value(split))
        mm = np.moveaxis(m.reshape(m.shape[0], m.shape[1], -1), -1, 0)
        c = np.linalg.cond(mm)
        if np.any(~np.isfinite(c)) or np.max(c) > COND_SPLIT:
            raise SliceNotTransverse(f"orbit/slice split condition number {np.max(c):.3e}")
        coef = D.solve(split, ra)
        return D.linear(lambda t: t[k:], coef)

    return VectorField(sl.chart, fn, "R_mu")


def reduce(L, a, sl, eta=None):
    """Reduced pair ``(omega_mu, R_mu)`` on the slice chart.

    ``eta``, if given, is pulled back too (only meaningful when it is basic).
    """
    omega_mu = pullback_2form(sl.embed, L.structure.omega)
    omega_mu.label = "omega_mu"
    reeb_mu = reduced_reeb(L, a, sl)
    eta_mu = None
    if eta is not None:
        eta_mu = pullback_1form(sl.embed, eta)
        eta_mu.label = "eta_mu"
    return ReducedStructure(sl, L, omega_mu, reeb_mu, eta_mu)


def group_contraction_report(L, sl, points, seed=None, tol=TOL_REDUCED):
    """``i_{d/ds}(psi^* omega)`` vanishes on ``T(R^k x N)``."""
    pts = _columns(points)
    k = sl.k
    psi = sl.quotient_map()
    w = pullback_2form(psi, L.structure.omega)
    red = ReducedStructure(sl, L, None, None)
    worst = 0.0
    for j in range(pts.shape[1]):
        y = pts[:, j]
        z = np.concatenate([np.zeros(k), y])
        W = np.asarray(D.value(w.evaluate(z)))
        tb = red.tangent_basis(y).basis
        n = W.shape[0]
        full = np.zeros((n, k + tb.shape[1]))
        full[:k, :k] = np.eye(k)
        full[k:, k:] = tb
        worst = max(worst, float(np.max(np.abs(W[:k] @ full))))
    return Report("group contraction", worst < tol, {"max_abs_contraction": worst},
                  {"points": pts.shape[1]}, seed)


def basic_form_report(L, a, points, seed=None, tol=TOL_REDUCED):
    """``i_xi(iota^* omega) = 0`` and ``i_xi d(iota^* omega) = 0`` on the level set."""
    pts = _columns(points)
    d3 = exterior_derivative_2(L.structure.omega)
    w1 = w2 = 0.0
    for j in range(pts.shape[1]):
        x = pts[:, j]
        tb = L.tangent_space(x).basis
        W = np.asarray(L.structure.omega(x))
        T3 = np.asarray(D.value(d3.evaluate(x)))
        for f in a.fundamental_fields:
            xi = np.asarray(f(x))
            w1 = max(w1, float(np.max(np.abs(xi @ W @ tb))))
            w2 = max(w2, float(np.max(np.abs(np.einsum("i,ijk,ja,kb->ab", xi, T3, tb, tb)))))
    return Report("basic form", max(w1, w2) < tol, {"i_xi_omega": w1, "i_xi_domega": w2},
                  {"points": pts.shape[1]}, seed)


def basic_one_form_report(L, a, eta, points, seed=None, tol=TOL_REDUCED):
    """``iota^* eta`` is basic: ``eta(xi) = 0`` and ``L_xi eta = 0`` on the level set."""
    from .fields import directional, lie_derivative_1

    pts = _columns(points)
    e_xi = max(float(np.max(np.abs(directional(f, eta).evaluate(pts)))) for f in a.fundamental_fields)
    lie = max(float(np.max(np.abs(D.value(lie_derivative_1(f, eta).evaluate(pts)))))
              for f in a.fundamental_fields)
    return Report("basic eta", max(e_xi, lie) < tol, {"eta_xi": e_xi, "lie_eta": lie},
                  {"points": pts.shape[1]}, seed)


def compare_dynamics(L, a, sl, reduced, x0, T, h, every=1, tol=1e-5):
    """Integrate the ambient Reeb field from ``x0`` and the reduced field from
    the slice image of ``x0``; report the max slice-coordinate deviation."""
    x0 = np.asarray(x0, dtype=float)
    if np.max(np.abs(L.residual(x0))) > 1e-8:
        raise DomainGuardViolation("start is not on the level set")
    cfg = RunConfig(h=h, T=T)
    amb = rk4_integrate(L.structure.reeb, x0, cfg)
    _, y0 = sl.to_slice(x0)
    y0 = y0[:, 0] if x0.ndim == 1 else y0.reshape((-1,) + x0.shape[1:])
    red = rk4_integrate(reduced.reeb_mu, y0, cfg)
    sel = slice(None, None, every)
    a_states = amb.columns()[:, sel]
    r_states = red.columns()[:, sel]
    _, ya = sl.to_slice(a_states.reshape(a_states.shape[0], -1))
    dev = np.abs(ya - r_states.reshape(r_states.shape[0], -1))
    worst = float(dev.max()) if dev.size else 0.0
    lev = float(np.max(np.abs(L.residual(amb.columns().reshape(amb.states.shape[1], -1)))))
    return Report("compare dynamics", worst < tol,
                  {"max_deviation": worst, "max_level_drift": lev, "T": T, "h": h},
                  {"steps": cfg.steps})


def constraint_preservation(L, x0, cfg):
    traj = rk4_integrate(L.structure.reeb, x0, cfg)
    cols = traj.columns().reshape(traj.states.shape[1], -1)
    return float(np.max(np.abs(L.residual(cols))))


__all__ = [
    "LevelSet", "SliceChart", "ReducedStructure", "newton_project", "project_to_level",
    "tangent_perp_report", "tangent_perp_batch", "reduce", "reduced_reeb", "compare_dynamics",
    "group_contraction_report", "basic_form_report", "basic_one_form_report",
    "constraint_preservation",
]
