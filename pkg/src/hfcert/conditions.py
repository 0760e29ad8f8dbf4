"""Measure the localization and orbital-interaction constants of an
integral set against a weight matrix.

Every constant is the smallest value for which the corresponding clause
holds with factor matrices built from the data itself:

    u_jl^-1 = max_{k,m} |[jk|lm]| w_jk w_lm            C~ = max_j sum_l u_jl^-1
    C^      = max |[jk|lm]| w_jk w_lm
    vt_jl^-1 = same max restricted to {j,k} != {l,m} and (j != k or l != m)
    eps~    = max_l sum_j vt_jl^-1,  v_jl^-1 = vt_jl^-1 / eps~
    C_check = max_j sum_k |<grad phi_j, grad phi_k>|
    ub_jkl^-1 = |attraction_l[j,k]| w_jk                C_breve = max_jk sum_l ub_jkl^-1
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import InvalidInputError
from .grassmann import canonical_point
from .hf import fock_matrix
from .integrals import IntegralSet, eri_abs, pair_exchange_gap
from .matnorm import WeightSet, norm_one_inf, validate_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LMOConstants:
    eps_tilde: float
    c_tilde: float
    c_hat: float
    c_check: float
    v_inv: np.ndarray
    u_inv: np.ndarray


@dataclass(frozen=True)
class OIConstants:
    eps: float
    delta: float
    gamma: float
    gamma_witness: Tuple[int, int]


@dataclass(frozen=True)
class NIConstants:
    c_breve: float
    u_breve_inv: np.ndarray


@dataclass(frozen=True)
class ConditionReport:
    """All hypothesis constants plus the factor matrices that realize them.

    ``v_inv``, ``u_inv`` and ``u_breve_inv`` hold the reciprocals v^-1, u^-1
    and ub^-1, so that vanishing integrals do not produce infinities.
    """

    eps_tilde: float
    c_tilde: float
    c_hat: float
    c_check: float
    c_breve: float
    eps: float
    delta: float
    gamma: float
    v_inv: np.ndarray = field(repr=False)
    u_inv: np.ndarray = field(repr=False)
    u_breve_inv: np.ndarray = field(repr=False)
    feasibility: Dict[str, bool] = field(default_factory=dict)

    def constants(self) -> Dict[str, float]:
        return {
            "eps_tilde": self.eps_tilde,
            "c_tilde": self.c_tilde,
            "c_hat": self.c_hat,
            "c_check": self.c_check,
            "c_breve": self.c_breve,
            "eps": self.eps,
            "delta": self.delta,
            "gamma": self.gamma,
        }

    def scaled(self, **factors) -> "ConditionReport":
        """Copy with selected constants multiplied, for falsification tests."""
        vals = self.constants()
        for name, factor in factors.items():
            vals[name] = vals[name] * factor
        return ConditionReport(**vals, v_inv=self.v_inv, u_inv=self.u_inv,
                               u_breve_inv=self.u_breve_inv,
                               feasibility=dict(self.feasibility))


def _weighted_eri(integrals: IntegralSet, weights: WeightSet) -> np.ndarray:
    if weights.nu != integrals.nu:
        raise InvalidInputError("weights and integrals have different nu")
    w = weights.w
    return eri_abs(integrals) * w[:, :, None, None] * w[None, None, :, :]


def restricted_pattern(nu: int) -> np.ndarray:
    """Boolean mask of (j,k,l,m) with {j,k} != {l,m} and (j != k or l != m)."""
    j, k, l, m = np.meshgrid(*(np.arange(nu),) * 4, indexing="ij")
    same_pair = ((j == l) & (k == m)) | ((j == m) & (k == l))
    return ~same_pair & ((j != k) | (l != m))


def measure_lmo(integrals: IntegralSet, weights: WeightSet) -> LMOConstants:
    scaled = _weighted_eri(integrals, weights)
    nu = integrals.nu
    u_inv = scaled.max(axis=(1, 3))  # over k and m -> (j, l)
    c_tilde = float(u_inv.sum(axis=1).max())
    c_hat = float(scaled.max())
    restricted = np.where(restricted_pattern(nu), scaled, 0.0)
    vt_inv = restricted.max(axis=(1, 3))
    eps_tilde = float(vt_inv.sum(axis=0).max())
    v_inv = vt_inv / eps_tilde if eps_tilde > 0 else np.zeros_like(vt_inv)
    c_check = float(np.abs(integrals.kinetic).sum(axis=1).max())
    return LMOConstants(eps_tilde, c_tilde, c_hat, c_check, v_inv, u_inv)


def measure_oi(integrals: IntegralSet) -> OIConstants:
    n, nu = integrals.n_elec, integrals.nu
    f = fock_matrix(canonical_point(n, nu), integrals)
    a = np.abs(f)
    occ, vir = slice(0, n), slice(n, nu)
    mixed = a[vir, occ]  # rows k in J_u, columns j in J_o
    eps = float(max(mixed.sum(axis=1).max(), mixed.sum(axis=0).max()))
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    delta = float(max(off[occ, occ].sum(axis=1).max(), off[vir, vir].sum(axis=1).max()))
    diag = np.real(np.diag(f))
    exch = np.real(pair_exchange_gap(integrals))  # (k, j)
    gaps = diag[vir, None] - diag[None, occ] - exch[vir, occ]
    kk, jj = np.unravel_index(np.argmin(gaps), gaps.shape)
    return OIConstants(eps, delta, float(gaps[kk, jj]), (int(jj), int(kk) + n))


def measure_ni(integrals: IntegralSet, weights: WeightSet) -> NIConstants:
    if weights.nu != integrals.nu:
        raise InvalidInputError("weights and integrals have different nu")
    ub = np.abs(integrals.attraction) * weights.w[None, :, :]
    c_breve = float(ub.sum(axis=0).max()) if ub.size else 0.0
    return NIConstants(c_breve, ub)


def measure(integrals: IntegralSet, weights: WeightSet) -> ConditionReport:
    """Run all three measurements and attach feasibility flags."""
    lmo = measure_lmo(integrals, weights)
    oi = measure_oi(integrals)
    ni = measure_ni(integrals, weights)
    feas = {
        "weights_valid": not validate_weights(weights),
        "eps_tilde_below_one": lmo.eps_tilde < 1.0,
        "eps_below_one": oi.eps < 1.0,
        "gamma_positive": oi.gamma > 0.0,
    }
    return ConditionReport(
        eps_tilde=lmo.eps_tilde, c_tilde=lmo.c_tilde, c_hat=lmo.c_hat,
        c_check=lmo.c_check, c_breve=ni.c_breve, eps=oi.eps, delta=oi.delta,
        gamma=oi.gamma, v_inv=lmo.v_inv, u_inv=lmo.u_inv,
        u_breve_inv=ni.u_breve_inv, feasibility=feas,
    )


@dataclass
class ContractionCheck:
    passed: bool
    trials: int
    worst_ratios: Dict[str, float]
    failures: List[str]


def contraction_matrices(eri: np.ndarray, alpha: np.ndarray, perm=(0, 1, 2, 3)):
    """T (masked, with Lambda permuted by ``perm``), T~ and T^.

    With Lambda_jklm = [jk|lm]:
        t_jk  = (1 - d_jk) sum_lm (1 - d_{jk},{lm}) Lambda'_jklm a_lm
        t~_jk = sum_lm Lambda_jklm a_lm
        t^_jk = sum_lm Lambda_jmlk a_lm
    where Lambda' is Lambda with its indices permuted.
    """
    nu = eri.shape[0]
    lam_p = np.transpose(eri, np.argsort(perm))
    j, k, l, m = np.meshgrid(*(np.arange(nu),) * 4, indexing="ij")
    same_pair = ((j == l) & (k == m)) | ((j == m) & (k == l))
    mask = (j != k) & ~same_pair
    t = np.einsum("jklm,lm->jk", np.where(mask, lam_p, 0.0), alpha)
    t_tilde = np.einsum("jklm,lm->jk", eri, alpha)
    t_hat = np.einsum("jmlk,lm->jk", eri, alpha)
    return t, t_tilde, t_hat


def _permuted_lambda(eri, perm):
    # Lambda'_{i0 i1 i2 i3} = Lambda_{i_perm[0] ...}
    return eri.transpose(np.argsort(perm))


def verify_clauses(integrals: IntegralSet, weights: WeightSet,
                   report: ConditionReport, slack: float = 1e-12) -> List[str]:
    """Evaluate every (LMO) and (NI) clause with the report's constants and
    factor matrices; returns the failed clauses with worst witnesses."""
    scaled = _weighted_eri(integrals, weights)
    nu = integrals.nu
    fails = []
    bound_i = report.eps_tilde * report.v_inv[:, None, :, None]
    excess = np.where(restricted_pattern(nu), scaled - bound_i, -np.inf)
    if excess.max() > slack * max(1.0, scaled.max()):
        fails.append(f"LMO(i) at {np.unravel_index(np.argmax(excess), excess.shape)}")
    if report.v_inv.sum(axis=0).max(initial=0.0) > 1.0 + slack:
        fails.append("LMO(ii)")
    excess = scaled - report.u_inv[:, None, :, None]
    if excess.max() > slack * max(1.0, scaled.max()):
        fails.append(f"LMO(iii) at {np.unravel_index(np.argmax(excess), excess.shape)}")
    if report.u_inv.sum(axis=1).max(initial=0.0) > report.c_tilde * (1 + slack) + slack:
        fails.append("LMO(iv)")
    if scaled.max(initial=0.0) > report.c_hat * (1 + slack) + slack:
        fails.append("LMO(v)")
    if np.abs(integrals.kinetic).sum(axis=1).max() > report.c_check * (1 + slack) + slack:
        fails.append("LMO(vi)")
    ub = np.abs(integrals.attraction) * weights.w[None]
    if np.any(ub > report.u_breve_inv * (1 + slack) + slack):
        fails.append("NI(bound)")
    if report.u_breve_inv.sum(axis=0).max(initial=0.0) > report.c_breve * (1 + slack) + slack:
        fails.append("NI(sum)")
    return fails


def _adversarial_alphas(eri, nu):
    """Matrices that drive each sum towards its worst case: for every
    output row j, align the phases of A' with the row-j coefficients."""
    out = []
    for j in range(nu):
        for k in range(nu):
            coeff = eri[j, k]  # (l, m)
            phase = np.where(np.abs(coeff) > 0, np.conj(coeff) / np.maximum(np.abs(coeff), 1e-300), 1.0)
            out.append(phase)
    return out


def contraction_bound_check(integrals: IntegralSet, weights: WeightSet,
                            report: ConditionReport, trials: int = 100,
                            seed: int = 0, slack: float = 1e-12) -> ContractionCheck:
    """Check ||T|| <= eps~ ||A'||, ||T~|| <= C~ ||A'||, ||T^|| <= C^ ||A'||.

    Random complex A' (``trials`` of them) plus phase-aligned worst-case
    candidates are tried; the masked T is checked for all 24 index
    permutations of Lambda. The clauses the three bounds rest on are
    also verified with the report's constants, so an understated constant
    is caught even when the sampled ratios are slack.
    """
    nu = integrals.nu
    eri = integrals.eri
    rng = np.random.default_rng(seed)
    alphas = [rng.standard_normal((nu, nu)) + 1j * rng.standard_normal((nu, nu))
              for _ in range(trials)]
    alphas += _adversarial_alphas(eri, nu)
    perms = list(itertools.permutations(range(4)))
    j, k, l, m = np.meshgrid(*(np.arange(nu),) * 4, indexing="ij")
    same_pair = ((j == l) & (k == m)) | ((j == m) & (k == l))
    mask = (j != k) & ~same_pair
    masked = [np.where(mask, _permuted_lambda(eri, p), 0.0) for p in perms]

    worst = {"T": 0.0, "T_tilde": 0.0, "T_hat": 0.0}
    failures = []
    bounds = {"T": report.eps_tilde, "T_tilde": report.c_tilde, "T_hat": report.c_hat}
    for idx, a in enumerate(alphas):
        na = norm_one_inf(a)
        if na == 0:
            continue
        vals = {
            "T_tilde": norm_one_inf(np.einsum("jklm,lm->jk", eri, a)),
            "T_hat": norm_one_inf(np.einsum("jmlk,lm->jk", eri, a)),
            "T": max(norm_one_inf(np.einsum("jklm,lm->jk", lam, a)) for lam in masked),
        }
        for name, val in vals.items():
            worst[name] = max(worst[name], val / na)
            if val > bounds[name] * na * (1 + slack) + slack:
                failures.append(f"{name} bound fails on trial {idx}: "
                                f"{val / na:.6g} > {bounds[name]:.6g}")
    failures += [f"clause {c}" for c in verify_clauses(integrals, weights, report, slack)]
    return ContractionCheck(not failures, len(alphas), worst, failures)
