import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cosymred.errors import PreconditionViolation, ToleranceAmbiguity
from cosymred.linalg import (
    AntisymmetricForm, Subspace, intersection, kernel, lemma45_check, lemma45_fuzz, nullspace,
    perp, random_instance, rank, scipy_nullspace_oracle, subspace_sum,
)

E = np.eye(3)
W12 = AntisymmetricForm([[0, 1, 0], [-1, 0, 0], [0, 0, 0]])


def span(*vs):
    return Subspace.span(vs)


def test_kernel_block_case():
    k = kernel(W12)
    assert k.dim == 1 and k.equals(span(E[2]))
    assert np.linalg.norm(k.basis[:, 0]) == pytest.approx(1.0)


def test_kernel_darboux_is_time_direction():
    m = np.zeros((5, 5))
    m[0, 2] = m[1, 3] = 1
    m -= m.T
    assert kernel(AntisymmetricForm(m)).equals(span(np.eye(5)[4]))


def test_kernel_vs_full_svd_oracle(rng):
    for _ in range(20):
        g = rng.normal(size=(5, 5))
        f = AntisymmetricForm(g - g.T)
        k = kernel(f)
        _, s, vt = np.linalg.svd(f.matrix)
        assert k.dim == 1
        assert k.equals(span(vt[-1]))


def test_asymmetric_input_rejected():
    with pytest.raises(ValueError):
        AntisymmetricForm([[0, 1], [0, 0]])


def test_perp_examples():
    a = span(E[0])
    p = perp(W12, a)
    assert p.dim == 2 and p.equals(span(E[0], E[2]))
    assert perp(W12, span(E[2])).dim == 3


def test_perp_needs_corank_one():
    with pytest.raises(PreconditionViolation):
        perp(AntisymmetricForm(np.zeros((3, 3))), span(E[0]))


def test_perp_of_kernel_is_everything(rng):
    form, reeb, _ = random_instance(5, rng)
    assert perp(form, kernel(form)).dim == 5


def test_lemma45_examples():
    r = lemma45_check(W12, E[2], span(E[0]))
    assert r.passed and not r.reeb_in_a and r.biperp.equals(span(E[0], E[2]))
    r = lemma45_check(W12, E[2], span(E[2]))
    assert r.passed and r.reeb_in_a and r.biperp.equals(span(E[2]))


def test_lemma45_wrong_reeb():
    with pytest.raises(PreconditionViolation):
        lemma45_check(W12, E[0], span(E[1]))


def test_perp_dim_random_7(rng):
    for _ in range(50):
        form, reeb, a = random_instance(7, rng, p_contains=0.0)
        assert perp(form, a).dim == 7 - a.dim


def test_fuzz_small_with_oracle():
    summary = lemma45_fuzz((3, 5), 100, seed=3, oracle=scipy_nullspace_oracle)
    for d, v in summary.items():
        assert v["passed"] == 100 and v["oracle_mismatch"] == 0
        assert 0 < v["reeb_in_a"] < 100


def test_fuzz_is_seeded():
    assert lemma45_fuzz((3,), 30, seed=5) == lemma45_fuzz((3,), 30, seed=5)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([3, 5, 7]))
def test_rotated_basis_invariance(seed, dim):
    rng = np.random.default_rng(seed)
    form, reeb, a = random_instance(dim, rng)
    r1 = lemma45_check(form, reeb, a)
    r2 = lemma45_check(form, reeb, a.rotated(rng))
    assert (r1.passed, r1.dim_perp, r1.reeb_in_a) == (r2.passed, r2.dim_perp, r2.reeb_in_a)
    assert r1.biperp.equals(r2.biperp)


def test_subspace_sum():
    assert subspace_sum(span(E[0]), span(E[2])).equals(span(E[0], E[2]))
    assert subspace_sum(span(E[0]), span(E[0])).dim == 1


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1))
def test_subspace_sum_rank_oracle(seed):
    rng = np.random.default_rng(seed)
    a = Subspace.span(list(rng.normal(size=(int(rng.integers(1, 4)), 6))))
    b = Subspace.span(list(rng.normal(size=(int(rng.integers(1, 4)), 6))))
    assert subspace_sum(a, b).dim == np.linalg.matrix_rank(np.hstack([a.basis, b.basis]))


def test_intersection():
    a = span(E[0], E[1])
    b = span(E[1], E[2])
    assert intersection(a, b).equals(span(E[1]))


def test_orthonormal_storage(rng):
    s = Subspace.span(list(rng.normal(size=(3, 6))))
    np.testing.assert_allclose(s.basis.T @ s.basis, np.eye(3), atol=1e-14)


def test_ambiguous_rank_raises():
    m = np.diag([1.0, 1e-10])
    with pytest.raises(ToleranceAmbiguity):
        rank(m)
    assert rank(np.diag([1.0, 1e-14])) == 1
    assert nullspace(np.diag([1.0, 1e-14])).dim == 1
