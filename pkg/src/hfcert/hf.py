"""Discretized Hartree-Fock energy of a density matrix, the Fock matrix, and
the gradient and Hessian of the energy pulled back through the retraction.

The energy is quadratic in P, so with G the two-electron operator of the
integral set:

    dE(P; D)          = tr(F(P) D),   F(P) = h + G(P)
    d^2E(P; D1, D2)   = tr(D1 G(D2))

and the pullback f(xi) = E(R(xi)) has
    df(xi; z)         = dE(R; dR(z))
    d^2f(xi; z1, z2)  = d^2E(R; dR(z1), dR(z2)) + dE(R; d^2R(z1, z2)).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import grassmann as gm
from .errors import InvalidInputError
from .integrals import IntegralSet
from .matnorm import norm_one_inf

log = logging.getLogger(__name__)

IMAG_WARN = 1e-10
IMAG_ERROR = 1e-6


def _real(value, label: str) -> float:
    value = complex(value)
    scale = max(1.0, abs(value.real))
    if abs(value.imag) > IMAG_ERROR * scale:
        raise InvalidInputError(f"{label} has imaginary part {value.imag:.3e}")
    if abs(value.imag) > IMAG_WARN * scale:
        warnings.warn(f"{label}: discarding imaginary part {value.imag:.3e}")
    return value.real


def _density(p, integrals: IntegralSet) -> np.ndarray:
    p = p.p if isinstance(p, gm.GrassmannPoint) else np.asarray(p, dtype=complex)
    if p.shape != (integrals.nu, integrals.nu):
        raise InvalidInputError(
            f"density is {p.shape}, integrals are for nu={integrals.nu}"
        )
    return p


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    t_part: float
    v_part: float
    g_tilde: float
    g_hat: float


def energy(p, integrals: IntegralSet) -> EnergyBreakdown:
    """E(P) = sum h_kj p_jk + 1/2 sum p_jk p_lm ([kj|ml] - [kl|mj])."""
    p = _density(p, integrals)
    eri = integrals.eri
    one = np.trace(integrals.h @ p)
    kin = np.trace(integrals.kinetic @ p)
    pot = -np.einsum("njk,kj->", integrals.attraction, p)
    direct = 0.5 * np.einsum("jk,lm,kjml->", p, p, eri, optimize=True)
    exchange = -0.5 * np.einsum("jk,lm,klmj->", p, p, eri, optimize=True)
    return EnergyBreakdown(
        total=_real(one + direct + exchange, "energy"),
        t_part=_real(kin, "kinetic energy"),
        v_part=_real(pot, "potential energy"),
        g_tilde=_real(direct, "direct energy"),
        g_hat=_real(exchange, "exchange energy"),
    )


def fock_matrix(p, integrals: IntegralSet) -> np.ndarray:
    """F_kj = h_kj + sum_lm p_lm ([kj|ml] - [kl|mj])."""
    p = _density(p, integrals)
    f = integrals.h + integrals.apply_two_electron(p)
    return 0.5 * (f + f.conj().T)


def energy_differential(p, integrals: IntegralSet, d) -> float:
    return _real(np.trace(fock_matrix(p, integrals) @ d), "dE")


def energy_second_differential(integrals: IntegralSet, d1, d2) -> float:
    return _real(np.trace(np.asarray(d1) @ integrals.apply_two_electron(d2)), "d2E")


def _check_anchor(point: gm.GrassmannPoint, integrals: IntegralSet):
    if point.nu != integrals.nu or point.n_rank != integrals.n_elec:
        raise InvalidInputError("chart point does not match the integral set")


class PullbackModel:
    """Energy pulled back to the tangent space at ``point``, evaluated at xi.

    Holds the shared chart quantities so gradient and Hessian assembly
    reuse one set of basis derivatives.
    """

    def __init__(self, integrals: IntegralSet, point: gm.GrassmannPoint, xi=None):
        _check_anchor(point, integrals)
        self.integrals = integrals
        self.point = point
        shape = point.tangent_shape
        self.b = np.zeros(shape, dtype=complex) if xi is None else gm._coords(point, xi)
        self.chart = gm._Chart(point, self.b)
        self.r = self.chart.value()
        self.fock = fock_matrix(self.r, integrals)
        self.basis = [t.embed() for t in gm.basis_vectors(point)]
        self.dirs = [self.chart.direction(e) for e in self.basis]
        self.d_basis = [self.chart.d1(d) for d in self.dirs]

    @property
    def shape(self):
        return self.point.tangent_shape

    def _df(self, d):
        return np.real(np.trace(self.fock @ d))

    def gradient_real(self) -> np.ndarray:
        return np.array([self._df(d) for d in self.d_basis])

    def gradient(self) -> np.ndarray:
        return gm.from_real(self.gradient_real(), self.shape)

    def gradient_masked(self) -> np.ndarray:
        """Same components via the masked (eta_jk)_b evaluation."""
        n, m = self.shape
        out = np.empty((n, m), dtype=complex)
        for j in range(n):
            for k in range(m):
                e = np.zeros((n, m), dtype=complex)
                e[j, k] = 1.0
                _, eta_b = gm.tangent_parts(self.point, e)
                d = self.chart.d1(self.chart.direction(eta_b, masked=True))
                out[j, k] = np.trace(self.fock @ d)
        return out

    def _second(self, r, c_dir, c_d1, c_g):
        d2r = self.chart.d2_half(self.dirs[r], c_dir) + self.chart.d2_half(c_dir, self.dirs[r])
        return np.real(np.trace(self.d_basis[r] @ c_g) + np.trace(self.fock @ d2r))

    def hessian_apply_real(self, zeta) -> np.ndarray:
        z = gm.embed_tangent(self.point, gm._coords(self.point, zeta))
        zd = self.chart.direction(z)
        zd1 = self.chart.d1(zd)
        zg = self.integrals.apply_two_electron(zd1)
        return np.array([self._second(r, zd, zd1, zg) for r in range(len(self.basis))])

    def hessian_matrix(self) -> np.ndarray:
        n = len(self.basis)
        gs = [self.integrals.apply_two_electron(d) for d in self.d_basis]
        h = np.empty((n, n))
        for c in range(n):
            for r in range(c, n):
                h[r, c] = self._second(r, self.dirs[c], self.d_basis[c], gs[c])
                h[c, r] = h[r, c]
        return h


def gradient(xi, integrals: IntegralSet, point: gm.GrassmannPoint) -> np.ndarray:
    """Complex N x (nu-N) matrix with entries df(eta_jk) + i df(hat_eta_jk)."""
    return PullbackModel(integrals, point, xi).gradient()


def gradient_masked(xi, integrals: IntegralSet, point: gm.GrassmannPoint) -> np.ndarray:
    return PullbackModel(integrals, point, xi).gradient_masked()


def gradient_norm(xi, integrals: IntegralSet, point: gm.GrassmannPoint) -> float:
    return norm_one_inf(gradient(xi, integrals, point))


def hessian_apply(xi, zeta, integrals: IntegralSet, point: gm.GrassmannPoint) -> np.ndarray:
    """Directional derivative of the gradient along zeta, as a complex matrix."""
    model = PullbackModel(integrals, point, xi)
    return gm.from_real(model.hessian_apply_real(zeta), model.shape)


def hessian_matrix(xi, integrals: IntegralSet, point: gm.GrassmannPoint) -> np.ndarray:
    """Real 2N(nu-N) square matrix in the interleaved basis ordering."""
    return PullbackModel(integrals, point, xi).hessian_matrix()


def hessian_diagonal_closed_form(integrals: IntegralSet, point=None) -> np.ndarray:
    """Diagonal entries at xi = 0 for the canonical chart:
    (F_kk - F_jj)/2 + ([kj|jk] - [kk|jj])/2, repeated for each basis pair."""
    n, nu = integrals.n_elec, integrals.nu
    point = point or gm.canonical_point(n, nu)
    f = fock_matrix(point, integrals)
    e = integrals.eri
    out = []
    for j in range(n):
        for k in range(n, nu):
            val = 0.5 * (f[k, k] - f[j, j]) + 0.5 * (e[k, j, j, k] - e[k, k, j, j])
            out += [_real(val, "Hessian diagonal")] * 2
    return np.array(out)


def population(p, indices: Iterable[int]) -> float:
    """Sum of diagonal entries of P over ``indices``."""
    p = p.p if isinstance(p, gm.GrassmannPoint) else np.asarray(p)
    idx = list(indices)
    if any(not 0 <= i < p.shape[0] for i in idx):
        raise InvalidInputError("population index out of range")
    return float(np.real(np.sum(np.diag(p)[idx])))


def commutator_residual(p, integrals: IntegralSet) -> float:
    """||F P - P F||_{1,inf}, which vanishes exactly at critical points."""
    p = _density(p, integrals)
    f = fock_matrix(p, integrals)
    return norm_one_inf(f @ p - p @ f)
