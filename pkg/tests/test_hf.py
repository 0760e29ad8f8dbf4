import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hfcert import grassmann as gm
from hfcert.hf import (PullbackModel, commutator_residual, energy, energy_differential,
                       energy_second_differential, fock_matrix, gradient, hessian_matrix,
                       population)
from hfcert.integrals import IntegralSet

from conftest import random_integrals


def brute_energy(p, integrals):
    e = integrals.eri
    nu = integrals.nu
    total = np.trace(integrals.h @ p)
    for j in range(nu):
        for k in range(nu):
            for l in range(nu):
                for m in range(nu):
                    total += 0.5 * p[j, k] * p[l, m] * (e[k, j, m, l] - e[k, l, m, j])
    return total.real


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4))
def test_energy_matches_direct_sum(seed, nu):
    rng = np.random.default_rng(seed)
    integrals = random_integrals(rng, nu, 1)
    p = gm.random_point(1, nu, rng).p
    assert energy(p, integrals).total == pytest.approx(brute_energy(p, integrals), abs=1e-10)


def test_energy_parts_add_up(rng):
    integrals = random_integrals(rng, 4, 2)
    p = gm.random_point(2, 4, rng).p
    e = energy(p, integrals)
    assert e.t_part + e.v_part + e.g_tilde + e.g_hat == pytest.approx(e.total, abs=1e-10)


def test_differentials_match_finite_differences(rng):
    integrals = random_integrals(rng, 4, 2)
    p = gm.random_point(2, 4, rng).p
    d1 = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    d1 = d1 + d1.conj().T
    d2 = rng.standard_normal((4, 4))
    d2 = d2 + d2.T
    h = 1e-5

    def e(x):
        return energy(x, integrals).total

    fd = (e(p + h * d1) - e(p - h * d1)) / (2 * h)
    assert energy_differential(p, integrals, d1) == pytest.approx(fd, rel=1e-7)
    fd2 = (energy_differential(p + h * d2, integrals, d1)
           - energy_differential(p - h * d2, integrals, d1)) / (2 * h)
    assert energy_second_differential(integrals, d1, d2) == pytest.approx(fd2, rel=1e-6)


def test_gradient_at_zero_is_fock_block(rng):
    integrals = random_integrals(rng, 5, 2)
    point = gm.canonical_point(2, 5)
    f = fock_matrix(point.p, integrals)
    g = gradient(np.zeros((2, 3)), integrals, point)
    assert np.allclose(g, f[:2, 2:], atol=1e-12)


def test_hessian_is_symmetric(rng):
    integrals = random_integrals(rng, 4, 2)
    point = gm.canonical_point(2, 4)
    h = hessian_matrix(np.full((2, 2), 0.1 + 0.05j), integrals, point)
    assert np.allclose(h, h.T)


def test_hessian_apply_matches_matrix(rng):
    integrals = random_integrals(rng, 4, 1)
    point = gm.canonical_point(1, 4)
    model = PullbackModel(integrals, point, np.array([[0.2, -0.1j, 0.05]]))
    zeta = np.array([[0.3, 0.1 + 0.2j, -0.4]])
    assert np.allclose(model.hessian_apply_real(zeta), model.hessian_matrix() @ gm.to_real(zeta))


def test_diagonal_noninteracting_instance_is_critical():
    nu = 3
    h = np.diag([0.0, 1.0, 2.0])
    integrals = IntegralSet(nu, 1, h, h, np.zeros((0, nu, nu)), np.zeros((nu,) * 4))
    point = gm.canonical_point(1, nu)
    assert commutator_residual(point, integrals) == 0.0
    assert np.allclose(gradient(np.zeros((1, 2)), integrals, point), 0)


def test_population():
    p = np.diag([1.0, 0.0, 1.0])
    assert population(p, [0, 1]) == 1.0
    assert population(p, range(3)) == 2.0
