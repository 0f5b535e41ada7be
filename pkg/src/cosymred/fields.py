"""Fields on a single coordinate chart and the exterior calculus on them.

A field wraps a closure taking the list of coordinates ``[x0, x1, ...]``.
Coordinates may be floats, arrays (a batch of points, shape ``B``) or dual
numbers, so every field is differentiable by :mod:`cosymred.dual`.  Closures
return nested component lists (or darrays) and the field assembles them into
arrays of shape ``T + B``:

=========  =========
field      ``T``
=========  =========
scalar     ``()``
vector     ``(n,)``
1-form     ``(n,)``
2-form     ``(n, n)``
=========  =========

Points are passed as a length-``n`` sequence or as an array of shape
``(n, *B)``: coordinates first, batch last.
"""

from dataclasses import dataclass

import numpy as np

from . import dual as D
from .errors import DomainGuardViolation
from .reports import Report

GUARD_MARGIN = 1e-9
FD_REL_STEP = 1e-5
TOL_CLOSED = 1e-9


# --------------------------------------------------------------------- charts

@dataclass(frozen=True)
class ExcludedSet:
    """Closed set ``{x : r_1(x) = ... = r_m(x) = 0}`` removed from a chart."""

    name: str
    residuals: object  # callable(coords) -> list of darrays

    def distance(self, coords):
        rs = self.residuals(coords)
        return np.max(np.abs(np.stack(np.broadcast_arrays(*[D.value(r) for r in rs]))), axis=0)


class CoordinateChart:
    """Named global coordinates on an open subset of R^n."""

    def __init__(self, names, excluded=(), guard=None, margin=GUARD_MARGIN):
        self.names = tuple(names)
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate coordinate names in {self.names}")
        self.excluded = tuple(excluded)
        self.guard = guard
        self.margin = margin

    @property
    def dim(self):
        return len(self.names)

    def index(self, name):
        return self.names.index(name)

    def with_excluded(self, *sets):
        return CoordinateChart(self.names, self.excluded + tuple(sets), self.guard, self.margin)

    def distance(self, x):
        """Sup-norm distance of the defining equations to the nearest excluded
        set (``inf`` when nothing is excluded)."""
        coords = coords_of(x)
        batch = batch_shape(coords)
        dist = np.full(batch, np.inf)
        for ex in self.excluded:
            dist = np.minimum(dist, ex.distance(coords))
        return dist

    def allowed(self, x):
        coords = coords_of(x)
        ok = np.asarray(self.distance(coords) > self.margin)
        if self.guard is not None:
            ok = ok & np.asarray(self.guard(coords), dtype=bool)
        return ok

    def check(self, x, step=None):
        ok = self.allowed(x)
        if not np.all(ok):
            pts = np.asarray(D.value(as_array(x)))
            if pts.ndim > 1:
                bad = pts.reshape(pts.shape[0], -1)[:, ~ok.ravel()].T
            else:
                bad = pts[None, :]
            where = "" if step is None else f" at step {step}"
            raise DomainGuardViolation(
                f"{len(bad)} point(s) outside the guarded domain{where}",
                points=bad.tolist(), step=step)

    def __repr__(self):
        return f"CoordinateChart({', '.join(self.names)})"


def darboux_chart(n, excluded=()):
    names = [f"q{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)] + ["t"]
    return CoordinateChart(names, excluded)


# ----------------------------------------------------------------- point utils

def coords_of(x):
    """List of coordinate leaves for a point or a batch of points."""
    return D.leaves(x)


def as_array(x):
    if isinstance(x, (list, tuple)):
        if any(isinstance(c, D.Dual) for c in x):
            return D.stack(list(x))
        return np.stack(np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in x]))
    return x


def batch_shape(coords):
    return D.broadcast_shapes(*[D.full_shape(c) for c in coords])


def sample_points(chart, lower, upper, n=200, seed=0, max_rounds=100):
    """``n`` uniform points of the box ``[lower, upper]`` allowed by the chart's
    guard, as an array of shape ``(dim, n)``."""
    rng = np.random.default_rng(seed)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (chart.dim,))
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (chart.dim,))
    got = []
    count = 0
    for _ in range(max_rounds):
        cand = lower[:, None] + (upper - lower)[:, None] * rng.random((chart.dim, n))
        ok = chart.allowed(cand)
        got.append(cand[:, ok])
        count += int(ok.sum())
        if count >= n:
            break
    else:
        raise DomainGuardViolation("could not draw enough admissible sample points")
    return np.concatenate(got, axis=1)[:, :n]


# ---------------------------------------------------------------------- fields

class Field:
    rank = None  # number of tensor indices

    def __init__(self, chart, fn, label=""):
        self.chart = chart
        self.fn = fn
        self.label = label

    @property
    def tshape(self):
        return (self.chart.dim,) * self.rank

    def evaluate(self, x):
        """Components as a darray of shape ``T + B`` (no guard check)."""
        coords = coords_of(x)
        out = self.fn(coords)
        batch = batch_shape(coords)
        if isinstance(out, (list, tuple)):
            return D.assemble(out, self.tshape, batch)
        tshape = self.tshape
        shape = tshape + tuple(batch)
        if D.full_shape(out) != shape:
            pad = (1,) * len(batch)

            def widen(a):
                a = np.asarray(a)
                if a.ndim and a.shape == tshape:
                    a = a.reshape(tshape + pad)
                return np.broadcast_to(a, shape)

            out = D.linear(widen, out)
        return out

    def __call__(self, x):
        self.chart.check(x)
        return D.value(self.evaluate(x))

    def _new(self, fn, label):
        return type(self)(self.chart, fn, label)

    def _same_chart(self, other):
        if other.chart.names != self.chart.names:
            raise ValueError("fields live on different charts")

    def __add__(self, other):
        if isinstance(other, Field):
            self._same_chart(other)
            return self._new(lambda c: self.evaluate(c) + other.evaluate(c),
                             f"({self.label} + {other.label})")
        return self._new(lambda c: self.evaluate(c) + other, f"({self.label} + {other})")

    def __sub__(self, other):
        if isinstance(other, Field):
            self._same_chart(other)
            return self._new(lambda c: self.evaluate(c) - other.evaluate(c),
                             f"({self.label} - {other.label})")
        return self._new(lambda c: self.evaluate(c) - other, f"({self.label} - {other})")

    def __mul__(self, k):
        if isinstance(k, ScalarField):
            return self._new(lambda c: self.evaluate(c) * k.evaluate(c), f"{k.label}*{self.label}")
        return self._new(lambda c: self.evaluate(c) * k, f"{k}*{self.label}")

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(lambda c: -self.evaluate(c), f"-{self.label}")

    def __repr__(self):
        return f"{type(self).__name__}({self.label or '<closure>'})"


class ScalarField(Field):
    rank = 0

    @classmethod
    def constant(cls, chart, c):
        return cls(chart, lambda x: float(c), str(c))

    @classmethod
    def coordinate(cls, chart, name):
        i = chart.index(name)
        return cls(chart, lambda x: x[i], name)

    def __rsub__(self, other):
        return self._new(lambda c: other - self.evaluate(c), f"({other} - {self.label})")

    __radd__ = Field.__add__


class VectorField(Field):
    rank = 1

    @classmethod
    def coordinate(cls, chart, name):
        """The coordinate field ``d/d name``."""
        i = chart.index(name)
        comps = [1.0 if j == i else 0.0 for j in range(chart.dim)]
        return cls(chart, lambda x: comps, f"d/d{name}")

    def apply(self, f):
        """Derivative ``X(f)`` of a scalar field."""
        return directional(self, differential(f))


class OneFormField(Field):
    rank = 1

    @classmethod
    def coordinate(cls, chart, name):
        """The coordinate differential ``d name``."""
        i = chart.index(name)
        comps = [1.0 if j == i else 0.0 for j in range(chart.dim)]
        return cls(chart, lambda x: comps, f"d{name}")


class TwoFormField(Field):
    rank = 2

    @classmethod
    def from_terms(cls, chart, terms, label=""):
        """Build ``sum coeff * dx^a ^ dx^b`` from ``(a, b, coeff)`` triples;
        ``coeff`` is a number or a callable of the coordinates."""
        n = chart.dim
        const = np.zeros((n, n))
        var = []
        for a, b, c in terms:
            i, j = chart.index(a), chart.index(b)
            if callable(c):
                var.append((i, j, c))
            else:
                const[i, j] += c
                const[j, i] -= c
        const.setflags(write=False)

        def fn(x):
            if not var:
                return const
            m = [[const[i, j] for j in range(n)] for i in range(n)]
            for i, j, c in var:
                v = c(x)
                m[i][j] = m[i][j] + v
                m[j][i] = m[j][i] - v
            return m

        return cls(chart, fn, label)

    def at(self, x):
        """Antisymmetric matrix at a single point."""
        from .linalg import AntisymmetricForm

        return AntisymmetricForm(self(x), tol=1e-10)


class SmoothMap:
    """Smooth map between charts given by coordinate expressions."""

    def __init__(self, source, target, fn, label=""):
        self.source = source
        self.target = target
        self.fn = fn
        self.label = label

    def components(self, x):
        out = self.fn(coords_of(x))
        if len(out) != self.target.dim:
            raise ValueError(f"map returns {len(out)} components, target has {self.target.dim}")
        return list(out)

    def evaluate(self, x):
        coords = coords_of(x)
        return D.assemble(self.components(coords), (self.target.dim,), batch_shape(coords))

    def __call__(self, x):
        self.source.check(x)
        return D.value(self.evaluate(x))

    def jacobian(self, x):
        """``J[a, i] = d phi^i / d x^a`` with the source index first."""
        return D.jacobian(self.evaluate, x)

    def then(self, other):
        """Composite ``other o self``."""
        return SmoothMap(self.source, other.target,
                         lambda x: other.components(self.components(x)),
                         f"{other.label} o {self.label}")

    @classmethod
    def identity(cls, chart):
        return cls(chart, chart, lambda x: list(x), "id")


# ------------------------------------------------------------------ calculus

def _fd_step(x):
    return FD_REL_STEP * np.maximum(1.0, np.abs(x))


def fd_jacobian(f, x, chart=None, step=None):
    """Central-difference Jacobian of ``f`` (coords -> darray), derivative
    index first; stencil points are checked against ``chart`` if given."""
    x = np.asarray(D.value(as_array(x)), dtype=float)
    cols = []
    for i in range(x.shape[0]):
        h = _fd_step(x[i]) if step is None else step
        xp = x.copy()
        xm = x.copy()
        xp[i] = x[i] + h
        xm[i] = x[i] - h
        if chart is not None:
            chart.check(xp)
            chart.check(xm)
        cols.append((D.value(f(coords_of(xp))) - D.value(f(coords_of(xm)))) / (2 * h))
    return np.stack(cols)


def _jac(f, x, chart):
    try:
        return D.jacobian(f, x)
    except TypeError:
        # closure not dual-compatible (e.g. calls math directly)
        return fd_jacobian(f, x, chart)


def differential(f):
    """``df`` with components ``df_i = d f / d x^i``."""
    return OneFormField(f.chart, lambda x: _jac(f.evaluate, x, f.chart), f"d{f.label}")


def directional(X, alpha):
    """Pairing ``alpha(X)``."""
    return ScalarField(X.chart, lambda x: D.einsum("i...,i...->...", X.evaluate(x), alpha.evaluate(x)),
                       f"{alpha.label}({X.label})")


def exterior_derivative(alpha):
    """``(d alpha)_ij = d_i alpha_j - d_j alpha_i``."""
    def fn(x):
        j = _jac(alpha.evaluate, x, alpha.chart)
        return D.linear(lambda a: a - np.swapaxes(a, 0, 1), j)

    return TwoFormField(alpha.chart, fn, f"d{alpha.label}")


class ThreeFormField(Field):
    rank = 3


def exterior_derivative_2(omega):
    """Components ``(d omega)_ijk = d_i w_jk + d_j w_ki + d_k w_ij``."""
    def fn(x):
        g = _jac(omega.evaluate, x, omega.chart)  # g[i, j, k] = d_i w_jk
        return D.linear(lambda a: a + np.transpose(a, (1, 2, 0) + tuple(range(3, a.ndim)))
                        + np.transpose(a, (2, 0, 1) + tuple(range(3, a.ndim))), g)

    return ThreeFormField(omega.chart, fn, f"d{omega.label}")


def wedge_1_1(alpha, beta):
    """``(alpha ^ beta)_ij = alpha_i beta_j - alpha_j beta_i``."""
    alpha._same_chart(beta)

    def fn(x):
        o = D.einsum("i...,j...->ij...", alpha.evaluate(x), beta.evaluate(x))
        return D.linear(lambda a: a - np.swapaxes(a, 0, 1), o)

    return TwoFormField(alpha.chart, fn, f"{alpha.label}^{beta.label}")


def interior_product_1(X, alpha):
    return directional(X, alpha)


def interior_product_2(X, omega):
    """``(i_X omega)_j = X^i omega_ij``."""
    X._same_chart(omega)
    return OneFormField(X.chart, lambda x: D.einsum("i...,ij...->j...", X.evaluate(x), omega.evaluate(x)),
                        f"i_{X.label}{omega.label}")


def lie_bracket(X, Y):
    """``[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i``."""
    X._same_chart(Y)

    def fn(x):
        dX = _jac(X.evaluate, x, X.chart)
        dY = _jac(Y.evaluate, x, Y.chart)
        return (D.einsum("j...,ji...->i...", X.evaluate(x), dY)
                - D.einsum("j...,ji...->i...", Y.evaluate(x), dX))

    return VectorField(X.chart, fn, f"[{X.label},{Y.label}]")


def lie_derivative_0(X, f):
    return X.apply(f)


def lie_derivative_1(X, alpha):
    """``(L_X alpha)_j = X^k d_k alpha_j + alpha_k d_j X^k``."""
    def fn(x):
        da = _jac(alpha.evaluate, x, alpha.chart)
        dX = _jac(X.evaluate, x, X.chart)
        return (D.einsum("k...,kj...->j...", X.evaluate(x), da)
                + D.einsum("k...,jk...->j...", alpha.evaluate(x), dX))

    return OneFormField(X.chart, fn, f"L_{X.label}{alpha.label}")


def lie_derivative_2(X, omega):
    """``(L_X w)_ij = X^k d_k w_ij + w_kj d_i X^k + w_ik d_j X^k``."""
    def fn(x):
        dw = _jac(omega.evaluate, x, omega.chart)
        dX = _jac(X.evaluate, x, X.chart)
        w = omega.evaluate(x)
        return (D.einsum("k...,kij...->ij...", X.evaluate(x), dw)
                + D.einsum("kj...,ik...->ij...", w, dX)
                + D.einsum("ik...,jk...->ij...", w, dX))

    return TwoFormField(X.chart, fn, f"L_{X.label}{omega.label}")


def pullback_0(phi, f):
    return ScalarField(phi.source, lambda x: f.evaluate(phi.components(x)), f"{phi.label}*{f.label}")


def pullback_1form(phi, alpha):
    """``(phi* alpha)_a = d_a phi^i alpha_i(phi(x))``."""
    def fn(x):
        return D.einsum("ai...,i...->a...", phi.jacobian(x), alpha.evaluate(phi.components(x)))

    return OneFormField(phi.source, fn, f"{phi.label}*{alpha.label}")


def pullback_2form(phi, omega):
    """``(phi* w)_ab = d_a phi^i w_ij(phi(x)) d_b phi^j``."""
    def fn(x):
        j = phi.jacobian(x)
        w = omega.evaluate(phi.components(x))
        return D.einsum("ai...,ij...,bj...->ab...", j, w, j)

    return TwoFormField(phi.source, fn, f"{phi.label}*{omega.label}")


def max_abs(field, points):
    """Max absolute component of ``field`` over a batch of points."""
    v = field(points)
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def closedness_check(omega, points, tol=TOL_CLOSED, seed=None):
    """Sampled test of ``d omega = 0``."""
    omega.chart.check(points)
    worst = max_abs(exterior_derivative_2(omega), points)
    return Report(f"closedness {omega.label}".strip(), worst < tol,
                  {"max_abs_domega": worst, "tol": tol},
                  {"points": int(np.prod(batch_shape(coords_of(points))) or 1)}, seed)


# ------------------------------------------------------------- fd oracles

def fd_differential(f, x):
    """Central-difference ``df`` at a point or batch (independent of duals)."""
    return fd_jacobian(lambda c: f.evaluate(c), x, f.chart)


def flow_step(X, x, eps):
    """One classical RK4 step of length ``eps`` along ``X`` (dual-aware)."""
    def ev(c):
        return X.evaluate(c)

    x = as_array(x)
    k1 = ev(x)
    k2 = ev(x + (eps / 2) * k1)
    k3 = ev(x + (eps / 2) * k2)
    k4 = ev(x + eps * k3)
    return x + (eps / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def fd_lie_derivative_2(X, omega, x, eps=1e-4):
    """``L_X omega`` at ``x`` from the flow: central differences of the
    pulled-back form ``Phi_s^* omega`` in ``s`` with one Richardson step.

    The flow map for small ``s`` is a single RK4 step, whose Jacobian comes
    from dual numbers.  This route never touches the coordinate formula used
    by :func:`lie_derivative_2`.
    """
    x = np.asarray(D.value(as_array(x)), dtype=float)

    def pulled(s):
        phi = SmoothMap(X.chart, X.chart, lambda c: D.leaves(flow_step(X, c, s)))
        return D.value(pullback_2form(phi, omega).evaluate(x))

    def central(h):
        return (pulled(h) - pulled(-h)) / (2 * h)

    return (4 * central(eps / 2) - central(eps)) / 3


def fd_lie_derivative_1(X, alpha, x, eps=1e-4):
    x = np.asarray(D.value(as_array(x)), dtype=float)

    def pulled(s):
        phi = SmoothMap(X.chart, X.chart, lambda c: D.leaves(flow_step(X, c, s)))
        return D.value(pullback_1form(phi, alpha).evaluate(x))

    def central(h):
        return (pulled(h) - pulled(-h)) / (2 * h)

    return (4 * central(eps / 2) - central(eps)) / 3
