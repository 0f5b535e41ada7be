"""Exact-in-spirit linear algebra on a single tangent space.

Rank decisions use singular values against a relative threshold
``RANK_RTOL * scale``.  Values inside ``[0.1, 10] * threshold`` are ambiguous
and raise :class:`ToleranceAmbiguity` instead of being silently classified.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionViolation, ToleranceAmbiguity

RANK_RTOL = 1e-10
AMBIGUITY_BAND = (0.1, 10.0)
ASYM_RTOL = 1e-12
SUBSPACE_ATOL = 1e-8


class AntisymmetricForm:
    """Matrix of a 2-form at a point, ``matrix[i, j] = omega(e_i, e_j)``."""

    __slots__ = ("matrix",)

    def __init__(self, matrix, tol=ASYM_RTOL):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"form matrix must be square, got shape {m.shape}")
        scale = max(1.0, float(np.abs(m).max(initial=0.0)))
        asym = float(np.abs(m + m.T).max(initial=0.0))
        if asym > tol * scale:
            raise ValueError(f"form matrix is not antisymmetric (|M + M^T| = {asym:.3e})")
        m.setflags(write=False)
        self.matrix = m

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, u, v):
        return float(np.asarray(u) @ self.matrix @ np.asarray(v))

    def __repr__(self):
        return f"AntisymmetricForm(dim={self.dim})"


class Subspace:
    """Linear subspace of R^dim with an orthonormal basis (columns)."""

    __slots__ = ("basis", "ambient")

    def __init__(self, basis, ambient):
        basis = np.asarray(basis, dtype=float).reshape(ambient, -1)
        basis.setflags(write=False)
        self.basis = basis
        self.ambient = ambient

    @classmethod
    def span(cls, vectors, ambient=None, rtol=RANK_RTOL):
        """Orthonormalize ``vectors`` by modified Gram-Schmidt, dropping
        dependent ones."""
        vecs = [np.asarray(v, dtype=float).ravel() for v in vectors]
        if ambient is None:
            if not vecs:
                raise ValueError("ambient dimension needed for an empty span")
            ambient = vecs[0].size
        scale = max((np.linalg.norm(v) for v in vecs), default=0.0)
        out = []
        for v in vecs:
            w = v.copy()
            # two passes keep orthogonality at machine precision
            for _ in range(2):
                for q in out:
                    w -= (q @ w) * q
            nrm = np.linalg.norm(w)
            if nrm > rtol * max(scale, 1e-300):
                out.append(w / nrm)
        basis = np.array(out).T if out else np.zeros((ambient, 0))
        return cls(basis, ambient)

    @classmethod
    def whole(cls, dim):
        return cls(np.eye(dim), dim)

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ self.basis.T

    def residual(self, v):
        """Norm of the component of ``v`` orthogonal to the subspace."""
        v = np.asarray(v, dtype=float)
        return float(np.linalg.norm(v - self.basis @ (self.basis.T @ v)))

    def contains(self, v, atol=SUBSPACE_ATOL):
        v = np.asarray(v, dtype=float)
        return self.residual(v) <= atol * max(1.0, float(np.linalg.norm(v)))

    def distance(self, other):
        """Spectral norm of the projector difference."""
        return float(np.linalg.norm(self.projector() - other.projector(), 2))

    def equals(self, other, atol=SUBSPACE_ATOL):
        return self.ambient == other.ambient and self.distance(other) < atol

    def rotated(self, rng):
        """Same subspace, basis mixed by a random orthogonal matrix."""
        if self.dim == 0:
            return self
        q, _ = np.linalg.qr(rng.standard_normal((self.dim, self.dim)))
        return Subspace(self.basis @ q, self.ambient)

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient={self.ambient})"


def _rank_split(s, scale, rtol=RANK_RTOL):
    """Number of singular values in ``s`` above the threshold."""
    if scale <= 0.0:
        return 0
    thr = rtol * scale
    lo, hi = AMBIGUITY_BAND
    for sv in s:
        if lo * thr <= sv <= hi * thr:
            raise ToleranceAmbiguity(
                f"singular value {sv:.3e} within ambiguity band around threshold {thr:.3e}")
    return int(np.count_nonzero(s > thr))


def nullspace(matrix, scale=None, rtol=RANK_RTOL):
    """Orthonormal nullspace basis of ``matrix`` (rows are constraints)."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    n = m.shape[1]
    if m.shape[0] == 0:
        return Subspace.whole(n)
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    if scale is None:
        scale = s[0] if s.size else 0.0
    rank = _rank_split(s, scale, rtol)
    return Subspace.span(vt[rank:], ambient=n)


def rank(matrix, scale=None, rtol=RANK_RTOL):
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    return _rank_split(s, s[0] if scale is None else scale, rtol)


def _sigma_max(form):
    return float(np.linalg.norm(form.matrix, 2))


def kernel(form):
    """Kernel of a 2-form: ``{v : omega(v, .) = 0}``."""
    return nullspace(form.matrix.T, scale=_sigma_max(form))


def perp(form, a):
    """``{v : omega(v, a) = 0 for all a in A}``; ``form`` must have corank 1."""
    k = kernel(form)
    if k.dim != 1:
        raise PreconditionViolation(f"form has corank {k.dim}, expected 1")
    return _perp(form, a)


def _perp(form, a):
    if a.dim == 0:
        return Subspace.whole(form.dim)
    # omega(v, a_k) = v . (Omega a_k)
    constraints = (form.matrix @ a.basis).T
    return nullspace(constraints, scale=_sigma_max(form))


def subspace_sum(a, b):
    if a.ambient != b.ambient:
        raise ValueError("subspaces live in different ambient spaces")
    return Subspace.span(list(a.basis.T) + list(b.basis.T), ambient=a.ambient)


def intersection(a, b):
    """``A ∩ B`` as the nullspace of the stacked complement projectors."""
    n = a.ambient
    c = np.vstack([np.eye(n) - a.projector(), np.eye(n) - b.projector()])
    return nullspace(c, scale=1.0)


def restrict(form, sub):
    """Matrix of the form pulled back to ``sub`` (in its orthonormal basis)."""
    return sub.basis.T @ form.matrix @ sub.basis


@dataclass(frozen=True)
class PerpDimensionReport:
    reeb_in_a: bool
    dim_v: int
    dim_a: int
    dim_perp: int
    predicted_dim_perp: int
    biperp: Subspace
    predicted_biperp: Subspace
    biperp_distance: float
    dimension_ok: bool
    biperp_ok: bool

    @property
    def passed(self):
        return self.dimension_ok and self.biperp_ok


def lemma45_check(form, reeb, a):
    """Dimension formula for ``A^perp`` and the biperp identity.

    With ``ker omega = <R>``: ``dim A^perp = dim V - dim A`` when ``R`` is not
    in ``A`` and ``dim V - dim A + 1`` otherwise; ``(A^perp)^perp`` is
    ``A + <R>`` resp. ``A``.
    """
    reeb = np.asarray(reeb, dtype=float)
    if not np.any(reeb):
        raise PreconditionViolation("Reeb vector is zero")
    k = kernel(form)
    r_line = Subspace.span([reeb])
    if k.dim != 1 or not k.equals(r_line):
        raise PreconditionViolation("kernel of the form is not spanned by the Reeb vector")
    n = form.dim
    r_in_a = a.contains(reeb / np.linalg.norm(reeb))
    ap = _perp(form, a)
    app = _perp(form, ap)
    predicted = n - a.dim + (1 if r_in_a else 0)
    target = a if r_in_a else subspace_sum(a, r_line)
    dist = app.distance(target) if app.dim == target.dim else float("inf")
    return PerpDimensionReport(
        reeb_in_a=r_in_a, dim_v=n, dim_a=a.dim, dim_perp=ap.dim,
        predicted_dim_perp=predicted, biperp=app, predicted_biperp=target,
        biperp_distance=dist, dimension_ok=ap.dim == predicted,
        biperp_ok=dist < SUBSPACE_ATOL,
    )


# ------------------------------------------------------------------ fuzzing

def random_corank1_form(dim, rng):
    """Random antisymmetric matrix of odd size; generically of corank 1."""
    if dim % 2 == 0:
        raise ValueError("corank-1 antisymmetric forms need odd dimension")
    g = rng.standard_normal((dim, dim))
    return AntisymmetricForm(g - g.T)


def random_instance(dim, rng, p_contains=0.3):
    """Random ``(form, reeb, A)`` with ``R`` inside ``A`` with probability
    ``p_contains``."""
    form = random_corank1_form(dim, rng)
    reeb = kernel(form).basis[:, 0]
    if rng.random() < p_contains:
        extra = int(rng.integers(0, dim))
        vecs = [reeb] + list(rng.standard_normal((extra, dim)))
    else:
        d = int(rng.integers(1, dim))
        vecs = list(rng.standard_normal((d, dim)))
    return form, reeb, Subspace.span(vecs, ambient=dim)


def scipy_nullspace_oracle(matrix, atol):
    """Nullspace via :func:`scipy.linalg.null_space` with an absolute cutoff."""
    from scipy.linalg import null_space

    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] <= atol:
        return np.eye(m.shape[1])
    return null_space(m, rcond=atol / s[0])


def _from_columns(cols, dim):
    return Subspace.span(list(np.asarray(cols, dtype=float).reshape(dim, -1).T), ambient=dim)


def lemma45_fuzz(dims=(3, 5, 7), cases=1000, seed=0, oracle=None):
    """Run :func:`lemma45_check` on random instances.

    ``oracle(constraints, atol) -> basis columns`` computes nullspaces
    independently, treating singular values below ``atol`` as zero; when
    given, every ``A^perp`` and ``(A^perp)^perp`` is cross-checked against it.
    Returns a dict of per-dimension counts.
    """
    rng = np.random.default_rng(seed)
    summary = {}
    for dim in dims:
        passed = failed = oracle_mismatch = contains = 0
        for _ in range(cases):
            form, reeb, a = random_instance(dim, rng)
            rep = lemma45_check(form, reeb, a)
            contains += rep.reeb_in_a
            ok = rep.passed
            if oracle is not None:
                atol = RANK_RTOL * _sigma_max(form)
                ap = _perp(form, a)
                o1 = _from_columns(oracle((form.matrix @ a.basis).T, atol), dim)
                o2 = _from_columns(oracle((form.matrix @ ap.basis).T, atol), dim)
                if not (o1.equals(ap) and o2.equals(rep.biperp)):
                    oracle_mismatch += 1
                    ok = False
            passed += ok
            failed += not ok
        summary[dim] = {"cases": cases, "passed": passed, "failed": failed,
                        "reeb_in_a": contains, "oracle_mismatch": oracle_mismatch}
    return summary
