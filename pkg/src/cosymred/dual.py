"""Tagged forward-mode dual numbers.

A :class:`Dual` is ``re + eps * e_tag`` with ``e_tag**2 = 0``.  Parts may be
floats, numpy arrays (for batches of points) or further duals carrying a
strictly smaller tag, so derivatives nest to any order.  Each differentiation
draws a fresh tag; this keeps an inner derivative taken while an outer one is
in flight from mixing the two perturbations.

Tensor-valued quantities ("darrays") are either plain arrays or duals whose
parts are arrays.  :func:`linear`, :func:`multilinear` and :func:`solve` lift
numpy operations to darrays, which is all the linear algebra the geometric
code needs.
"""

import itertools
import math

import numpy as np

_tags = itertools.count(1)


def new_tag():
    return next(_tags)


class Dual:
    __slots__ = ("re", "eps", "tag")
    # make numpy defer to our reflected operators
    __array_ufunc__ = None

    def __init__(self, re, eps, tag):
        self.re = re
        self.eps = eps
        self.tag = tag

    def __repr__(self):
        return f"Dual({self.re!r}, {self.eps!r}, tag={self.tag})"

    @property
    def shape(self):
        return full_shape(self)

    def __getitem__(self, idx):
        shape = full_shape(self)
        return linear(lambda a: np.broadcast_to(a, shape)[idx], self)

    def __len__(self):
        return full_shape(self)[0]

    # arithmetic; ``other`` with a larger tag owns the operation
    def __add__(self, other):
        if isinstance(other, Dual):
            if other.tag > self.tag:
                return other.__radd__(self)
            if other.tag == self.tag:
                return Dual(self.re + other.re, self.eps + other.eps, self.tag)
        return Dual(self.re + other, self.eps, self.tag)

    def __radd__(self, other):
        return Dual(other + self.re, self.eps, self.tag)

    def __sub__(self, other):
        if isinstance(other, Dual):
            if other.tag > self.tag:
                return other.__rsub__(self)
            if other.tag == self.tag:
                return Dual(self.re - other.re, self.eps - other.eps, self.tag)
        return Dual(self.re - other, self.eps, self.tag)

    def __rsub__(self, other):
        return Dual(other - self.re, -self.eps, self.tag)

    def __mul__(self, other):
        if isinstance(other, Dual):
            if other.tag > self.tag:
                return other.__rmul__(self)
            if other.tag == self.tag:
                return Dual(self.re * other.re,
                            self.re * other.eps + self.eps * other.re,
                            self.tag)
        return Dual(self.re * other, self.eps * other, self.tag)

    def __rmul__(self, other):
        return Dual(other * self.re, other * self.eps, self.tag)

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if other.tag > self.tag:
                return other.__rtruediv__(self)
            if other.tag == self.tag:
                q = self.re / other.re
                return Dual(q, (self.eps - q * other.eps) / other.re, self.tag)
        return Dual(self.re / other, self.eps / other, self.tag)

    def __rtruediv__(self, other):
        q = other / self.re
        return Dual(q, -q * self.eps / self.re, self.tag)

    def __pow__(self, p):
        if isinstance(p, Dual):
            if p.tag > self.tag:
                return p.__rpow__(self)
            return exp(p * log(self))
        if p == 0:
            return Dual(self.re ** 0, 0.0 * self.eps, self.tag)
        if p == 1:
            return self
        return Dual(self.re ** p, p * self.re ** (p - 1) * self.eps, self.tag)

    def __rpow__(self, base):
        val = base ** self.re
        return Dual(val, val * log(base) * self.eps, self.tag)

    def __neg__(self):
        return Dual(-self.re, -self.eps, self.tag)

    def __pos__(self):
        return self

    def __abs__(self):
        return Dual(abs(self.re), sign(self.re) * self.eps, self.tag)

    # comparisons act on the primal value
    def __lt__(self, other):
        return primal(self) < primal(other)

    def __le__(self, other):
        return primal(self) <= primal(other)

    def __gt__(self, other):
        return primal(self) > primal(other)

    def __ge__(self, other):
        return primal(self) >= primal(other)

    def __float__(self):
        return float(primal(self))


# ---------------------------------------------------------------- elementary

def _is_scalar(x):
    return isinstance(x, (float, int))


def sin(x):
    if isinstance(x, Dual):
        return Dual(sin(x.re), cos(x.re) * x.eps, x.tag)
    return math.sin(x) if _is_scalar(x) else np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(cos(x.re), -sin(x.re) * x.eps, x.tag)
    return math.cos(x) if _is_scalar(x) else np.cos(x)


def tan(x):
    if isinstance(x, Dual):
        t = tan(x.re)
        return Dual(t, (1 + t * t) * x.eps, x.tag)
    return math.tan(x) if _is_scalar(x) else np.tan(x)


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.re)
        return Dual(e, e * x.eps, x.tag)
    return math.exp(x) if _is_scalar(x) else np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(log(x.re), x.eps / x.re, x.tag)
    return math.log(x) if _is_scalar(x) else np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = sqrt(x.re)
        return Dual(s, 0.5 * x.eps / s, x.tag)
    return math.sqrt(x) if _is_scalar(x) else np.sqrt(x)


def sinh(x):
    if isinstance(x, Dual):
        return Dual(sinh(x.re), cosh(x.re) * x.eps, x.tag)
    return math.sinh(x) if _is_scalar(x) else np.sinh(x)


def cosh(x):
    if isinstance(x, Dual):
        return Dual(cosh(x.re), sinh(x.re) * x.eps, x.tag)
    return math.cosh(x) if _is_scalar(x) else np.cosh(x)


def tanh(x):
    if isinstance(x, Dual):
        t = tanh(x.re)
        return Dual(t, (1 - t * t) * x.eps, x.tag)
    return math.tanh(x) if _is_scalar(x) else np.tanh(x)


def arctan(x):
    if isinstance(x, Dual):
        return Dual(arctan(x.re), x.eps / (1 + x.re * x.re), x.tag)
    return math.atan(x) if _is_scalar(x) else np.arctan(x)


def sign(x):
    return np.sign(primal(x))


ELEMENTARY = {
    "sin": sin, "cos": cos, "tan": tan, "exp": exp, "log": log,
    "sqrt": sqrt, "sinh": sinh, "cosh": cosh, "tanh": tanh,
    "atan": arctan, "arctan": arctan, "abs": abs,
}


# ------------------------------------------------------------------ darrays

def primal(x):
    while isinstance(x, Dual):
        x = x.re
    return x


def value(x):
    """Strip every perturbation and return a float array."""
    return np.asarray(primal(x), dtype=float)


def is_plain(x):
    return not isinstance(x, Dual)


def broadcast_shapes(*shapes):
    # fast path: scalars and identical shapes, without numpy's overhead
    out = ()
    for s in shapes:
        if not s or s == out:
            continue
        if not out:
            out = tuple(s)
            continue
        return np.broadcast_shapes(*shapes)
    return out


def full_shape(x):
    if isinstance(x, float):
        return ()
    if isinstance(x, Dual):
        return broadcast_shapes(full_shape(x.re), full_shape(x.eps))
    if isinstance(x, np.ndarray):
        return x.shape
    return np.shape(x)


def top_tag(args):
    t = 0
    for a in args:
        if isinstance(a, Dual) and a.tag > t:
            t = a.tag
    return t


def _split(x, tag):
    if isinstance(x, Dual) and x.tag == tag:
        return x.re, x.eps
    return x, None


def strip(x, tag):
    """Primal part with respect to ``tag`` only."""
    if isinstance(x, Dual):
        if x.tag == tag:
            return x.re
        if x.tag > tag:
            return Dual(strip(x.re, tag), strip(x.eps, tag), x.tag)
    return x


def tangent(x, tag):
    """Coefficient of the ``tag`` perturbation (0.0 if absent)."""
    if isinstance(x, Dual):
        if x.tag == tag:
            return x.eps
        if x.tag > tag:
            return Dual(tangent(x.re, tag), tangent(x.eps, tag), x.tag)
    return 0.0


def linear(f, *args):
    """Lift a function that is jointly linear in its arguments.

    ``f`` must broadcast scalar zeros, which stand in for absent tangents.
    """
    t = top_tag(args)
    if t == 0:
        return f(*args)
    parts = [_split(a, t) for a in args]
    re = linear(f, *[p[0] for p in parts])
    eps = linear(f, *[0.0 if p[1] is None else p[1] for p in parts])
    return Dual(re, eps, t)


def multilinear(f, *args):
    """Lift a function linear in each argument separately (products)."""
    t = top_tag(args)
    if t == 0:
        return f(*args)
    parts = [_split(a, t) for a in args]
    res = [p[0] for p in parts]
    re = multilinear(f, *res)
    eps = None
    for i, (_, e) in enumerate(parts):
        if e is None:
            continue
        term = multilinear(f, *res[:i], e, *res[i + 1:])
        eps = term if eps is None else eps + term
    return Dual(re, eps, t)


def einsum(spec, *args):
    return multilinear(lambda *a: np.einsum(spec, *a), *args)


def matvec(a, x):
    """``a[i, j, ...] x[j, ...]`` with trailing batch axes."""
    return einsum("ij...,j...->i...", a, x)


def stack(items, axis=0, shape=None):
    """Stack darrays after broadcasting them to a common shape."""
    if shape is None:
        shape = broadcast_shapes(*[full_shape(i) for i in items])
    shape = tuple(shape)

    def f(*xs):
        if not shape and all(_is_scalar(x) for x in xs):
            return np.array(xs, dtype=float)
        out = np.empty((len(xs),) + shape)
        for i, x in enumerate(xs):
            out[i] = x
        return out if axis == 0 else np.moveaxis(out, 0, axis)

    return linear(f, *items)


def assemble(nested, tshape, batch=()):
    """Turn nested component lists of shape ``tshape`` into one darray of
    shape ``tshape + batch``."""
    tshape = tuple(tshape)
    leaves = list(_flatten(nested, len(tshape)))
    size = int(np.prod(tshape)) if tshape else 1
    if len(leaves) != size:
        raise ValueError(f"expected {size} components, got {len(leaves)}")
    shape = broadcast_shapes(tuple(batch), *[full_shape(v) for v in leaves])
    flat = stack(leaves, axis=0, shape=shape)
    return linear(lambda a: np.reshape(a, tshape + np.shape(a)[1:]), flat)


def _flatten(nested, depth):
    if depth == 0:
        yield nested
        return
    for item in nested:
        yield from _flatten(item, depth - 1)


def solve(a, b):
    """Solve ``a x = b`` for darrays ``a`` (n, n, *B) and ``b`` (n, *B)."""
    t = top_tag((a, b))
    if t == 0:
        return _solve_plain(a, b)
    a0, a1 = _split(a, t)
    b0, b1 = _split(b, t)
    x0 = solve(a0, b0)
    rhs = b1
    if a1 is not None:
        corr = matvec(a1, x0)
        rhs = -corr if rhs is None else rhs - corr
    return Dual(x0, solve(a0, rhs), t)


def _solve_plain(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    batch = np.broadcast_shapes(a.shape[2:], b.shape[1:])
    a = np.broadcast_to(a, (n, n) + batch)
    b = np.broadcast_to(b, (n,) + batch)
    am = np.moveaxis(a, (0, 1), (-2, -1))
    bm = np.moveaxis(b, 0, -1)[..., None]
    x = np.linalg.solve(am, bm)[..., 0]
    return np.moveaxis(x, -1, 0)


# ------------------------------------------------------------- derivatives

def leaves(x):
    """Coordinates of a point as a list (floats for a single point)."""
    if isinstance(x, (list, tuple)):
        return list(x)
    if isinstance(x, Dual):
        return [x[i] for i in range(full_shape(x)[0])]
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x.tolist()
    return [x[i] for i in range(x.shape[0])]


def jacobian(f, x):
    """Forward-mode derivative of ``f`` at the point ``x``.

    ``f`` maps a list of coordinates to a darray of shape ``T + B``; the
    result has shape ``(n,) + T + B`` with the derivative index first.

    All ``n`` directions are seeded in one pass: the direction becomes an
    extra leading batch axis, which the elementwise closures and the lifted
    linear algebra broadcast over.
    """
    x = leaves(x)
    n = len(x)
    tag = new_tag()
    batch = broadcast_shapes(*[full_shape(c) for c in x])
    pad = (1,) * len(batch)
    eye = np.eye(n)
    seeded = [Dual(c, eye[i].reshape((n,) + pad), tag) for i, c in enumerate(x)]
    out = f(seeded)
    wide = (n,) + tuple(batch)
    oshape = full_shape(out)
    if oshape[len(oshape) - len(wide):] == wide:
        tshape = oshape[:len(oshape) - len(wide)]
    else:
        # output does not depend on the point at all
        tshape = oshape
    t = tangent(out, tag)
    nt = len(tshape)
    return linear(lambda a: np.moveaxis(np.broadcast_to(a, tshape + wide), nt, 0) + 0.0, t)


def derivative(f, s):
    """Derivative of a one-parameter function ``f(s)`` at ``s``."""
    tag = new_tag()
    return tangent(f(Dual(s, 1.0, tag)), tag)
