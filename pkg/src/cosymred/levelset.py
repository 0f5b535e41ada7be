"""Planar cuts of momentum level sets as gnuplot data."""

import numpy as np
from scipy.optimize import brentq

from . import dual as D
from .errors import InputError
from .reports import Report


def _residual_fn(L):
    def f(x):
        return np.asarray(D.value(L.residuals(list(x))[0]), dtype=float)

    return f


def levelset_cut(s, mu, plane, axes, ranges, grid=101, out=None):
    """Sample ``J_H - mu`` on the plane spanned by ``axes`` through the point
    fixed by ``plane`` (unlisted coordinates are 0) and locate the zero curve.

    The data file has two gnuplot blocks: ``index 0`` is the grid
    ``x y residual`` with blank lines between scan lines (for ``splot`` or
    contouring), ``index 1`` holds points of the cut itself.
    """
    chart = s.chart
    for nm in list(plane) + list(axes):
        if nm not in chart.names:
            raise InputError(f"unknown coordinate {nm!r}")
    if axes[0] == axes[1] or set(axes) & set(plane):
        raise InputError("axes must be two distinct coordinates not fixed by the plane")
    if grid < 3:
        raise InputError("grid needs at least 3 points per axis")
    L = s.level_set(mu)
    if L.J.k != 1:
        raise InputError("level-set cuts need a one-component momentum map")
    ia, ib = chart.index(axes[0]), chart.index(axes[1])
    base = np.zeros(chart.dim)
    for nm, v in plane.items():
        base[chart.index(nm)] = v
    defaulted = [nm for nm in chart.names if nm not in plane and nm not in axes]
    xs = np.linspace(ranges[0], ranges[1], grid)
    ys = np.linspace(ranges[2], ranges[3], grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.repeat(base[:, None], X.size, axis=1)
    pts[ia], pts[ib] = X.ravel(), Y.ravel()
    f = _residual_fn(L)
    G = f(pts).reshape(X.shape)

    def along(fixed_i, fixed_v, var_i):
        def g(u):
            x = base.copy()
            x[fixed_i] = fixed_v
            x[var_i] = u
            return float(f(x))

        return g

    curve = []
    for i, x in enumerate(xs):
        g = along(ia, x, ib)
        for j in np.nonzero(np.sign(G[i, :-1]) * np.sign(G[i, 1:]) < 0)[0]:
            curve.append((x, brentq(g, ys[j], ys[j + 1], xtol=1e-14)))
    for j, y in enumerate(ys):
        g = along(ib, y, ia)
        for i in np.nonzero(np.sign(G[:-1, j]) * np.sign(G[1:, j]) < 0)[0]:
            curve.append((brentq(g, xs[i], xs[i + 1], xtol=1e-14), y))
    for i, j in zip(*np.nonzero(G == 0.0)):
        curve.append((xs[i], ys[j]))
    curve = np.array(sorted(set(curve))) if curve else np.zeros((0, 2))
    worst = 0.0
    if len(curve):
        cp = np.repeat(base[:, None], len(curve), axis=1)
        cp[ia], cp[ib] = curve[:, 0], curve[:, 1]
        worst = float(np.max(np.abs(f(cp))))
    if out:
        with open(out, "w") as fh:
            fixed = ", ".join(f"{k}={v:g}" for k, v in sorted(plane.items()))
            fh.write(f"# {s.name}: J_H - mu on the ({axes[0]}, {axes[1]}) plane, mu={[float(v) for v in L.mu]}\n")
            fh.write(f"# fixed: {fixed or 'none'}; set to zero: {', '.join(defaulted) or 'none'}\n")
            fh.write(f"# {axes[0]} {axes[1]} residual\n")
            for i, x in enumerate(xs):
                for j, y in enumerate(ys):
                    fh.write(f"{x:.17g} {y:.17g} {G[i, j]:.17g}\n")
                fh.write("\n")
            fh.write("\n# zero set\n")
            for x, y in curve:
                fh.write(f"{x:.17g} {y:.17g}\n")
    return Report("levelset cut", worst < 1e-9,
                  {"curve_points": len(curve), "max_abs_residual": worst},
                  {"axes": list(axes), "plane": plane, "zeroed": defaulted, "grid": grid,
                   "file": out or ""})
