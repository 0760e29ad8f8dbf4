"""Schmidt orthogonalization of a nearly orthonormal localized family,
with the weighted bounds on the transform and propagation of the
condition constants to the orthonormalized basis.

Convention: row ``a`` of the transform C holds the coefficients of the new
orbital, phi_a = sum_k C[a, k] phi'_k, and the Gram matrix is
A[k, l] = <phi'_k, phi'_l> (conjugate-linear in the first slot). The new
overlap is then conj(C) A C^T, which is C A C^* for real data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np
import scipy.linalg

from .conditions import ConditionReport, measure
from .errors import ConsistencyError, HypothesisError, InvalidInputError
from .integrals import IntegralSet, transform_basis
from .matnorm import WeightSet, norm_one_inf, norm_weighted

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-10
BOUND_SLACK = 1e-12
NEUMANN_FLOOR = 1e-16
NEUMANN_MAX_TERMS = 100_000


@dataclass(frozen=True)
class EpsilonChain:
    eps0: float
    eps1: float
    eps2: float
    eps3: float
    eps4: float


def epsilon_chain(eps0: float) -> EpsilonChain:
    """eps1..eps4 as functions of the weighted Gram defect eps0."""
    if not 0.0 <= eps0 < 1.0:
        raise InvalidInputError(f"eps0 must lie in [0, 1), got {eps0}")
    e1 = eps0 / (1.0 - eps0)
    if e1 >= 1.0:
        raise HypothesisError(f"eps1 = {e1:.4g} >= 1 (need eps0 < 1/2)")
    q = 1.0 / (1.0 - e1)
    e2 = eps0 / (1.0 - eps0) * q
    e3 = 4 * e2 * q**3 + 6 * e2**2 * q**2 + 4 * e2**3 * q + e2**4
    e4 = max(q**2 - 1.0, 1.0 - (1.0 + e1) ** -2)
    return EpsilonChain(eps0, e1, e2, e3, e4)


def _check_gram(gram, weights: WeightSet) -> np.ndarray:
    a = np.asarray(gram, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError("Gram matrix must be square")
    if a.shape[0] != weights.nu:
        raise InvalidInputError("Gram matrix and weights differ in dimension")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("Gram matrix has non-finite entries")
    scale = max(1.0, np.abs(a).max())
    if np.abs(a - a.conj().T).max() > 1e-12 * scale:
        raise InvalidInputError("Gram matrix is not Hermitian")
    return 0.5 * (a + a.conj().T)


def gram_defect(gram, weights: WeightSet) -> float:
    """eps0 = ||A - I||_{w,1,inf}."""
    a = np.asarray(gram, dtype=complex)
    return norm_weighted(a - np.eye(a.shape[0]), weights)


def comparison_matrix(gram, weights: Optional[WeightSet] = None) -> np.ndarray:
    """Entrywise majorant alpha = sum_m |A - I|^m of the principal inverses.

    For a unit-diagonal Gram this is the Neumann series of the off-diagonal
    moduli. Summation stops once a term's weighted norm (plain 1,inf norm
    without weights) is below 1e-16.
    """
    a = np.asarray(gram, dtype=complex)
    nu = a.shape[0]
    base = np.abs(a - np.eye(nu))
    total = np.eye(nu)
    term = np.eye(nu)
    for _ in range(NEUMANN_MAX_TERMS):
        term = term @ base
        total += term
        size = norm_weighted(term, weights) if weights is not None else norm_one_inf(term)
        if size < NEUMANN_FLOOR:
            return total
    raise HypothesisError("Neumann series for the comparison matrix did not converge")


@dataclass
class OrthoResult:
    c: np.ndarray
    s: np.ndarray
    norms: np.ndarray
    chain: EpsilonChain
    s_weighted_norm: float
    orthonormality_error: float

    @property
    def eps0(self):
        return self.chain.eps0

    @property
    def eps1(self):
        return self.chain.eps1

    @property
    def eps2(self):
        return self.chain.eps2

    @property
    def eps3(self):
        return self.chain.eps3

    @property
    def eps4(self):
        return self.chain.eps4


def overlap_after(c, gram) -> np.ndarray:
    """Gram matrix of the transformed family."""
    c = np.asarray(c, dtype=complex)
    return c.conj() @ np.asarray(gram, dtype=complex) @ c.T


def schmidt(gram, weights: WeightSet) -> OrthoResult:
    """Schmidt orthogonalization in index order from the Gram matrix alone.

    For each j the projection coefficients onto the span of the earlier
    functions come from a fresh Cholesky solve with the leading block.
    """
    a = _check_gram(gram, weights)
    nu = a.shape[0]
    eps0 = gram_defect(a, weights)
    if eps0 >= 1.0:
        raise HypothesisError(f"Gram defect eps0 = {eps0:.4g} >= 1")
    chain = epsilon_chain(eps0)
    c = np.zeros((nu, nu), dtype=complex)
    s = np.zeros((nu, nu), dtype=complex)
    norms = np.empty(nu)
    for j in range(nu):
        if j == 0:
            coef = np.zeros(0, dtype=complex)
            sq = a[0, 0].real
        else:
            g = a[:j, j]
            try:
                fac = scipy.linalg.cho_factor(a[:j, :j], lower=True)
            except np.linalg.LinAlgError as exc:
                raise InvalidInputError("Gram matrix is not positive definite") from exc
            coef = scipy.linalg.cho_solve(fac, g)
            sq = (a[j, j] - g.conj() @ coef).real
        if not sq > 0.0:
            raise InvalidInputError("Gram matrix is not positive definite")
        norms[j] = np.sqrt(sq)
        s[j, :j] = coef / norms[j]
        c[j, j] = 1.0 / norms[j]
        c[j, :j] = -s[j, :j]
    ortho_err = float(np.abs(overlap_after(c, a) - np.eye(nu)).max())
    if ortho_err > ORTHO_TOL:
        raise ConsistencyError(f"orthonormality residual {ortho_err:.2e}")
    s_norm = norm_weighted(s, weights)
    if np.any(np.abs(norms - 1.0) > chain.eps1 + BOUND_SLACK):
        raise ConsistencyError("a Schmidt norm lies outside [1 - eps1, 1 + eps1]")
    if s_norm > chain.eps2 + BOUND_SLACK:
        raise ConsistencyError(f"||S||_w = {s_norm:.4g} exceeds eps2 = {chain.eps2:.4g}")
    log.debug("schmidt: eps0=%.3g |S|_w=%.3g", eps0, s_norm)
    return OrthoResult(c, s, norms, chain, s_norm, ortho_err)


PRIMED_KEYS = ("eps_tilde", "c_tilde", "c_hat", "c_check", "c_breve", "eps", "delta", "gamma")


def propagate_constants(primed: Union[ConditionReport, Mapping[str, float]],
                        chain: EpsilonChain) -> Dict[str, float]:
    """Condition constants guaranteed for the orthonormalized basis."""
    p = primed.constants() if isinstance(primed, ConditionReport) else dict(primed)
    missing = [k for k in PRIMED_KEYS if k not in p]
    if missing:
        raise InvalidInputError(f"missing primed constants: {missing}")
    q = 1.0 / (1.0 - chain.eps1)
    e2, e3, e4 = chain.eps2, chain.eps3, chain.eps4
    mix = 2 * e2 * q + e2**2
    lmo = q**4 + e3
    one = q**2 + mix
    nuc = p["c_check"] + p["c_breve"]
    tail = mix * nuc + 2 * e4 * p["eps_tilde"] * q**2 + e3 * (p["c_tilde"] + p["c_hat"])
    return {
        "eps_tilde": p["eps_tilde"] * q**4 + e3 * p["c_tilde"],
        "c_tilde": lmo * p["c_tilde"],
        "c_hat": lmo * p["c_hat"],
        "c_check": one * p["c_check"],
        "c_breve": one * p["c_breve"],
        "eps": q**2 * p["eps"] + tail,
        "delta": q**2 * p["delta"] + tail,
        "gamma": ((1 + chain.eps1) ** -2 * p["gamma"] - 2 * mix * nuc
                  - 2 * e4 * (p["c_tilde"] + 2 * p["c_hat"]) * q**2
                  - 2 * e3 * (p["c_tilde"] + p["c_hat"])),
    }


def orthogonalize_pipeline(primed: IntegralSet, gram, weights: WeightSet
                           ) -> Tuple[IntegralSet, OrthoResult]:
    """Orthonormalize and re-express the integrals in the new basis."""
    if primed.nu != np.asarray(gram).shape[0]:
        raise InvalidInputError("Gram matrix and integrals differ in dimension")
    result = schmidt(gram, weights)
    return transform_basis(primed, result.c), result


@dataclass
class PropagationCheck:
    measured_primed: Dict[str, float]
    predicted: Dict[str, float]
    measured: Dict[str, float]
    within: Dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.within.values())


def propagation_check(primed: IntegralSet, gram, weights: WeightSet,
                      rel_slack: float = 1e-9) -> PropagationCheck:
    """Measure constants before and after orthogonalization and compare the
    latter with the propagated bounds. gamma is a lower bound, the rest are
    upper bounds."""
    before = measure(primed, weights).constants()
    out, result = orthogonalize_pipeline(primed, gram, weights)
    after = measure(out, weights).constants()
    pred = propagate_constants(before, result.chain)
    within = {}
    for key in PRIMED_KEYS:
        slack = rel_slack * max(1.0, abs(pred[key]))
        if key == "gamma":
            within[key] = after[key] >= pred[key] - slack
        else:
            within[key] = after[key] <= pred[key] + slack
    return PropagationCheck(before, pred, after, within)


def random_gram(rng, weights: WeightSet, eps0: float, complex_entries: bool = False):
    """Unit-diagonal Hermitian Gram matrix with ||A - I||_w = eps0."""
    nu = weights.nu
    if not 0.0 <= eps0 < 1.0:
        raise InvalidInputError("eps0 must lie in [0, 1)")
    x = rng.uniform(-1.0, 1.0, (nu, nu))
    if complex_entries:
        x = x + 1j * rng.uniform(-1.0, 1.0, (nu, nu))
    x = np.triu(x, 1)
    x = (x + x.conj().T) / weights.w
    norm = norm_weighted(x, weights)
    if norm > 0:
        x *= eps0 / norm
    return np.eye(nu) + x
