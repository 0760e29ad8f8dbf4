import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hfcert.errors import HypothesisError, InvalidInputError
from hfcert.integrals import generate_synthetic, synthetic_weights
from hfcert.matnorm import WeightSet, norm_weighted
from hfcert.ortho import (comparison_matrix, epsilon_chain, gram_defect,
                          orthogonalize_pipeline, overlap_after, propagate_constants,
                          random_gram, schmidt)


def test_chain_at_zero():
    ch = epsilon_chain(0.0)
    assert (ch.eps1, ch.eps2, ch.eps3, ch.eps4) == (0.0, 0.0, 0.0, 0.0)


def test_chain_example():
    ch = epsilon_chain(0.1)
    assert ch.eps1 == pytest.approx(1 / 9)
    assert ch.eps2 == pytest.approx(1 / 8)
    assert ch.eps4 == pytest.approx(17 / 64)


def test_chain_monotone():
    chains = [epsilon_chain(e) for e in np.linspace(0, 0.45, 30)]
    for name in ("eps1", "eps2", "eps3", "eps4"):
        vals = [getattr(c, name) for c in chains]
        assert all(b > a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("eps0", [-0.1, 1.0])
def test_chain_range(eps0):
    with pytest.raises(InvalidInputError):
        epsilon_chain(eps0)


def test_identity_gram():
    res = schmidt(np.eye(4), synthetic_weights(4, 1.0))
    assert np.allclose(res.c, np.eye(4)) and np.allclose(res.s, 0)
    assert res.eps0 == 0.0


def test_two_by_two_by_hand():
    res = schmidt(np.array([[1.0, 0.1], [0.1, 1.0]]), WeightSet.uniform(2, 1.0))
    r = np.sqrt(0.99)
    assert res.norms[1] == pytest.approx(r)
    assert res.s[1, 0] == pytest.approx(0.1 / r)
    assert np.allclose(res.c, [[1, 0], [-0.1 / r, 1 / r]])


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.floats(0.0, 0.2), st.booleans(), st.integers(0, 10_000))
def test_schmidt_bounds(nu, eps0, cplx, seed):
    weights = synthetic_weights(nu, 1.0)
    gram = random_gram(np.random.default_rng(seed), weights, eps0, complex_entries=cplx)
    res = schmidt(gram, weights)
    assert np.abs(overlap_after(res.c, gram) - np.eye(nu)).max() <= 1e-10
    assert res.s_weighted_norm <= res.eps2 + 1e-15
    assert np.all(np.abs(res.norms - 1) <= res.eps1 + 1e-15)


@pytest.mark.parametrize("nu", [3, 5, 6])
def test_comparison_matrix_dominates_inverses(rng, nu):
    weights = synthetic_weights(nu, 1.0)
    gram = random_gram(rng, weights, 0.3, complex_entries=True)
    alpha = comparison_matrix(gram, weights)
    eps0 = gram_defect(gram, weights)
    # the identity term is counted with unit weight
    assert norm_weighted(alpha - np.eye(nu), weights) <= eps0 / (1 - eps0) + 1e-12
    assert np.abs(alpha).sum(axis=1).max() <= 1 / (1 - eps0) + 1e-12
    for j in range(1, nu + 1):
        inv = np.linalg.inv(gram[:j, :j])
        assert np.all(np.abs(inv) <= alpha[:j, :j] + 1e-12)


def test_span_preserved(rng):
    weights = synthetic_weights(5, 1.0)
    gram = random_gram(rng, weights, 0.15)
    # realize the family as vectors with this Gram matrix
    vecs = np.linalg.cholesky(gram).conj().T  # columns phi'_k
    res = schmidt(gram, weights)
    new = vecs @ res.c.T
    for n in range(1, 5):
        a, b = vecs[:, :n], new[:, :n]
        pa = a @ np.linalg.pinv(a)
        pb = b @ b.conj().T
        assert np.abs(pa - pb).max() <= 1e-10


def test_large_defect_rejected():
    with pytest.raises(HypothesisError):
        schmidt(np.array([[1.0, 0.9], [0.9, 1.0]]), WeightSet.uniform(2, 2.0))


def test_not_positive_definite_rejected():
    with pytest.raises((InvalidInputError, HypothesisError)):
        schmidt(np.array([[1.0, 0.0], [0.0, -1.0]]), WeightSet.uniform(2, 1.0))


def test_propagation_identity():
    primed = dict(eps_tilde=0.1, c_tilde=0.2, c_hat=0.3, c_check=0.4, c_breve=0.5,
                  eps=0.01, delta=0.02, gamma=1.0)
    assert propagate_constants(primed, epsilon_chain(0.0)) == pytest.approx(primed)


def test_propagation_c_tilde_example():
    ch = epsilon_chain(0.1)
    primed = dict(eps_tilde=0, c_tilde=1.0, c_hat=0, c_check=0, c_breve=0,
                  eps=0, delta=0, gamma=0)
    out = propagate_constants(primed, ch)
    assert out["c_tilde"] == pytest.approx((8 / 9) ** -4 + ch.eps3)


def test_gamma_decreases_with_defect():
    primed = dict(eps_tilde=0.05, c_tilde=0.1, c_hat=0.05, c_check=0.5, c_breve=0.1,
                  eps=0.01, delta=0.01, gamma=1.0)
    gammas = [propagate_constants(primed, epsilon_chain(e))["gamma"] for e in (0, 0.01, 0.05)]
    assert gammas[0] > gammas[1] > gammas[2]


def test_pipeline_identity_and_idempotence(rng):
    integrals, weights = generate_synthetic(4, 4, 2)
    out, _ = orthogonalize_pipeline(integrals, np.eye(4), weights)
    assert np.allclose(out.eri, integrals.eri) and np.allclose(out.h, integrals.h)
    gram = random_gram(rng, weights, 0.05)
    _, res = orthogonalize_pipeline(integrals, gram, weights)
    second = schmidt(overlap_after(res.c, gram), weights)
    assert second.eps0 <= 1e-10
