import numpy as np
import pytest

from hfcert import grassmann as gm
from hfcert.hf import energy
from hfcert.integrals import IntegralSet, generate_synthetic

ACCEPTANCE_LINES = []


def record(criterion, passed, detail=""):
    line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


def random_hermitian(rng, nu, scale=1.0):
    a = rng.standard_normal((nu, nu)) + 1j * rng.standard_normal((nu, nu))
    return scale * 0.5 * (a + a.conj().T)


def random_integrals(rng, nu, n_elec, eri_scale=0.3, real=False):
    """Integral set with all the symmetries but no localization structure.

    The eri is a positive combination of products of Hermitian pair
    densities, like a Coulomb kernel in a discretized basis.
    """
    draw = (lambda: random_hermitian(rng, nu).real) if real else (lambda: random_hermitian(rng, nu))
    eri = np.zeros((nu,) * 4, dtype=complex)
    for _ in range(3):
        a = draw()
        eri += rng.uniform(0.2, 1.0) * np.einsum("jk,lm->jklm", a, a)
    eri *= eri_scale / max(np.abs(eri).max(), 1e-300)
    n_nuc = 2
    mats = [draw() for _ in range(n_nuc)]
    att = np.array([rng.uniform(0.5, 1.0) * (m @ m.conj().T) / nu for m in mats])
    kinetic = draw() + nu * np.eye(nu)
    h = kinetic - att.sum(axis=0)
    positions = rng.standard_normal((n_nuc, 3))
    return IntegralSet(nu, n_elec, h, kinetic, att, eri, np.ones(n_nuc), positions)


def random_tangent(rng, shape, radius):
    b = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return b * (radius / max(np.abs(b).sum(axis=1).max(), np.abs(b).sum(axis=0).max()))


def pulled_back_energy(integrals, point, b):
    return energy(gm.retract_matrix(point, b), integrals).total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_6_2():
    return generate_synthetic(1, 6, 2)
