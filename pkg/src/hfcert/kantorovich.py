"""Kantorovich certificate for the Newton iteration on the pulled-back
energy, the iteration itself, and measurements used to audit the bounds.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import scipy.linalg

from . import grassmann as gm
from .conditions import ConditionReport
from .errors import InvalidInputError, SolverError
from .hf import PullbackModel
from .integrals import IntegralSet
from .matnorm import norm_one_inf

log = logging.getLogger(__name__)

GRID_POINTS = 64
GRID_LO, GRID_HI = 1e-4, 1.0 - 1e-4
BISECTION_STEPS = 40
RCOND_MIN = 1e-14


@dataclass(frozen=True)
class LipschitzConstants:
    big_c: float
    big_d: float
    big_l: float


def lipschitz_constants(eps_hat: float, c_tilde: float, c_hat: float,
                        c_breve: float, c_check: float) -> LipschitzConstants:
    """C, D and L = C + 3D at radius eps_hat."""
    if not 0.0 <= eps_hat < 1.0:
        raise InvalidInputError("eps_hat must lie in [0, 1)")
    e = eps_hat
    q = 1.0 / (1.0 - e * e)
    big_c = (6.0 * (c_tilde + c_hat + c_breve + c_check) * (1 + e) ** 2 * q**3
             * (1 + 2 * e * (1 + q * (1 + e) * (1 + 3 * e))
                + 2 * q**2 * (1 + e) ** 2 * e**2))
    big_d = (2.0 * (c_tilde + c_hat) * (1 + e) * q**2
             * (1 + q * (1 + e) * e)
             * (1 + q * (1 + e) * (1 + 5 * e) + 4 * q**2 * (1 + e) ** 2 * e**2))
    return LipschitzConstants(big_c, big_d, big_c + 3 * big_d)


def newton_radii(c_star: float, eps: float, big_l: float) -> Dict[str, float]:
    """theta, both forms of tau*, tau** for given c*, eps and L."""
    theta = c_star**2 * eps * big_l
    if theta > 0.5:
        return {"theta": theta, "tau_star": math.nan, "tau_star_alt": math.nan,
                "tau_star_star": math.nan}
    root = math.sqrt(1.0 - 2.0 * theta)
    tau = 2.0 * c_star * eps / (1.0 + root)
    if big_l > 0:
        tau_alt = (1.0 - root) / (c_star * big_l)
        tau2 = (1.0 + root) / (c_star * big_l)
    else:
        tau_alt, tau2 = tau, math.inf
    return {"theta": theta, "tau_star": tau, "tau_star_alt": tau_alt,
            "tau_star_star": tau2}


def displacement_bound(tau_star: float) -> float:
    """tau* {1 + (1 - tau*^2)^-1 (1 + tau*)^2}."""
    return tau_star * (1.0 + (1.0 + tau_star) ** 2 / (1.0 - tau_star**2))


@dataclass
class KantorovichCertificate:
    c_star: Optional[float]
    eps: float
    eps_hat: Optional[float]
    big_c: Optional[float]
    big_d: Optional[float]
    big_l: Optional[float]
    theta: Optional[float]
    tau_star: Optional[float]
    tau_star_star: Optional[float]
    g: Optional[float]
    r: Optional[float]
    displacement_bound: Optional[float]
    gates: Dict[str, bool]
    margins: Dict[str, float]
    ball_within_domain: Optional[bool] = None

    @property
    def valid(self) -> bool:
        return all(self.gates.values())

    def failed_gates(self) -> List[str]:
        return [name for name, ok in self.gates.items() if not ok]


def _feasible(e, c_star, eps, consts):
    lc = lipschitz_constants(e, *consts)
    rad = newton_radii(c_star, eps, lc.big_l)
    ok = rad["theta"] < 0.5 and e > rad["tau_star"]
    return ok, lc, rad


def certify(report: ConditionReport) -> KantorovichCertificate:
    """Gate checks and certificate constants for the smallest feasible eps_hat.

    eps_hat is searched on a log grid over (1e-4, 1 - 1e-4) and the first
    feasible grid point is refined by bisection against its infeasible
    neighbour. Feasible means theta < 1/2 and eps_hat > tau*.
    """
    denom = report.gamma / 2.0 - report.delta - 2.0 * report.eps_tilde
    gates = {"positivity": denom > 0.0, "theta": False, "eps_hat_exceeds_tau": False}
    margins = {"positivity": denom}
    empty = dict(c_star=None, eps=report.eps, eps_hat=None, big_c=None, big_d=None,
                 big_l=None, theta=None, tau_star=None, tau_star_star=None, g=None,
                 r=None, displacement_bound=None)
    if denom <= 0.0:
        return KantorovichCertificate(**empty, gates=gates, margins=margins)

    c_star = 1.0 / denom
    consts = (report.c_tilde, report.c_hat, report.c_breve, report.c_check)
    grid = np.geomspace(GRID_LO, GRID_HI, GRID_POINTS)
    first = None
    for i, e in enumerate(grid):
        if _feasible(e, c_star, report.eps, consts)[0]:
            first = i
            break
    if first is None:
        # report the best the grid could do for diagnostics
        e = float(grid[0])
        lc = lipschitz_constants(e, *consts)
        rad = newton_radii(c_star, report.eps, lc.big_l)
        gates["theta"] = rad["theta"] < 0.5
        margins["theta"] = 0.5 - rad["theta"]
        margins["eps_hat_exceeds_tau"] = (e - rad["tau_star"]
                                          if not math.isnan(rad["tau_star"]) else -math.inf)
        return KantorovichCertificate(**{**empty, "c_star": c_star, "eps_hat": e,
                                         "big_c": lc.big_c, "big_d": lc.big_d,
                                         "big_l": lc.big_l, "theta": rad["theta"]},
                                      gates=gates, margins=margins)
    hi = float(grid[first])
    if first > 0:
        lo = float(grid[first - 1])
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if _feasible(mid, c_star, report.eps, consts)[0]:
                hi = mid
            else:
                lo = mid
    ok, lc, rad = _feasible(hi, c_star, report.eps, consts)
    assert ok
    tau = rad["tau_star"]
    g = c_star * report.eps
    gates["theta"] = True
    gates["eps_hat_exceeds_tau"] = True
    margins["theta"] = 0.5 - rad["theta"]
    margins["eps_hat_exceeds_tau"] = hi - tau
    r = tau - g
    return KantorovichCertificate(
        c_star=c_star, eps=report.eps, eps_hat=hi, big_c=lc.big_c, big_d=lc.big_d,
        big_l=lc.big_l, theta=rad["theta"], tau_star=tau,
        tau_star_star=rad["tau_star_star"], g=g, r=r,
        displacement_bound=displacement_bound(tau), gates=gates, margins=margins,
        # the ball around xi_1 has radius r and centre within g of 0
        ball_within_domain=bool(g + r < hi),
    )


@dataclass
class NewtonStep:
    xi: np.ndarray
    grad_norm: float
    step_norm: float


@dataclass
class NewtonTrace:
    iterates: List[NewtonStep]
    converged: bool
    final_point: gm.GrassmannPoint
    final_xi: np.ndarray
    recenter: bool = False

    @property
    def step_norms(self) -> List[float]:
        return [s.step_norm for s in self.iterates if not math.isnan(s.step_norm)]

    def quadratic_constants(self, floor: float = 1e-13) -> List[float]:
        """kappa_m = |d_{m+1}| / |d_m|^2 for consecutive steps above ``floor``."""
        s = [v for v in self.step_norms if v > floor]
        return [s[i + 1] / s[i] ** 2 for i in range(len(s) - 1)]


def _solve(h, rhs):
    with warnings.catch_warnings():
        # singularity is judged by the condition estimate below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(h)
    anorm = np.abs(h).sum(axis=0).max()
    gecon = scipy.linalg.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not rcond >= RCOND_MIN:
        return None, rcond
    return scipy.linalg.lu_solve((lu, piv), rhs), rcond


def newton_solve(integrals: IntegralSet, tol: float = 1e-10, max_iter: int = 50,
                 recenter: bool = False, start: Optional[gm.GrassmannPoint] = None):
    """Newton iteration xi_{m+1} = xi_m - F'(xi_m)^-1 F(xi_m) from xi_0 = 0.

    By default every iterate lives in the tangent space at P0 (the setting
    of the certificate). With ``recenter`` the chart moves to the current
    point after each step; that variant carries no certificate.

    Returns (trace, final point). Raises SolverError on an ill-conditioned
    Hessian.
    """
    if tol <= 0 or max_iter < 1:
        raise InvalidInputError("need tol > 0 and max_iter >= 1")
    point = start or gm.canonical_point(integrals.n_elec, integrals.nu)
    shape = point.tangent_shape
    xi = np.zeros(shape, dtype=complex)
    steps: List[NewtonStep] = []
    converged = False
    for it in range(max_iter + 1):
        model = PullbackModel(integrals, point, xi)
        grad = model.gradient_real()
        gnorm = norm_one_inf(gm.from_real(grad, shape))
        log.info("newton %d: |F| = %.3e", it, gnorm)
        if gnorm <= tol:
            steps.append(NewtonStep(xi.copy(), gnorm, math.nan))
            converged = True
            break
        if it == max_iter:
            steps.append(NewtonStep(xi.copy(), gnorm, math.nan))
            break
        delta, rcond = _solve(model.hessian_matrix(), -grad)
        if delta is None:
            steps.append(NewtonStep(xi.copy(), gnorm, math.nan))
            trace = NewtonTrace(steps, False, gm.retract(point, xi), xi, recenter)
            raise SolverError(f"Hessian is numerically singular (rcond={rcond:.2e}) "
                              f"at iteration {it}", trace)
        d = gm.from_real(delta, shape)
        steps.append(NewtonStep(xi.copy(), gnorm, norm_one_inf(d)))
        if recenter:
            point = gm.retract(point, d)
            xi = np.zeros(shape, dtype=complex)
        else:
            xi = xi + d
    final = gm.retract(point, xi)
    trace = NewtonTrace(steps, converged, final, xi, recenter)
    return trace, final


@dataclass
class DisplacementCheck:
    passed: bool
    measured: float
    bound: float
    uniqueness_radius: Optional[float]


def displacement_check(p_final, p_start, cert: KantorovichCertificate) -> DisplacementCheck:
    """Compare ||P_inf - P0||_{1,inf} with the certified bound."""
    a = p_final.p if isinstance(p_final, gm.GrassmannPoint) else np.asarray(p_final)
    b = p_start.p if isinstance(p_start, gm.GrassmannPoint) else np.asarray(p_start)
    measured = norm_one_inf(a - b)
    if not cert.valid:
        raise InvalidInputError("displacement check needs a valid certificate")
    return DisplacementCheck(measured <= cert.displacement_bound, measured,
                             cert.displacement_bound, cert.tau_star_star)


def x_operator_norm(m: np.ndarray, shape) -> float:
    """Upper bound on the induced norm of a real operator on the chart.

    ``m`` acts on interleaved (Re, Im) coordinates of N x (nu-N) matrices
    normed by ||B||_{1,inf}. Each 2x2 block is replaced by its spectral
    norm, giving a nonnegative operator A_{(jk),(lm)}; for those the norms
    induced by max-row-sum and max-column-sum are exact:
        n_inf = max_j sum_l max_m sum_k A_{jk,lm}
        n_1   = max_k sum_m max_l sum_j A_{jk,lm}
    and max(n_1, n_inf) bounds the induced ||.||_{1,inf} norm.
    """
    n, mm = shape
    q = n * mm
    blocks = np.asarray(m, dtype=float).reshape(q, 2, q, 2).transpose(0, 2, 1, 3)
    a = np.linalg.norm(blocks, ord=2, axis=(2, 3)).reshape(n, mm, n, mm)
    n_inf = a.sum(axis=1).max(axis=2).sum(axis=1).max()
    n_one = a.sum(axis=0).max(axis=1).sum(axis=1).max()
    return float(max(n_inf, n_one))


def inverse_jacobian_norm(integrals: IntegralSet, point=None) -> float:
    """Bound on ||F'(0)^-1|| in the chart norm (compare with c*)."""
    point = point or gm.canonical_point(integrals.n_elec, integrals.nu)
    h = PullbackModel(integrals, point).hessian_matrix()
    return x_operator_norm(np.linalg.inv(h), point.tangent_shape)


def lipschitz_ratios(integrals: IntegralSet, radius: float, samples: int = 10,
                     seed: int = 0, point=None) -> List[float]:
    """||F'(xi) - F'(xi')|| / ||xi - xi'|| over random pairs in the closed
    chart ball of the given radius (operator norm bounded as above)."""
    point = point or gm.canonical_point(integrals.n_elec, integrals.nu)
    shape = point.tangent_shape
    rng = np.random.default_rng(seed)

    def draw():
        b = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return b * (radius * rng.uniform(0.1, 1.0) / norm_one_inf(b))

    out = []
    for _ in range(samples):
        x1, x2 = draw(), draw()
        h1 = PullbackModel(integrals, point, x1).hessian_matrix()
        h2 = PullbackModel(integrals, point, x2).hessian_matrix()
        out.append(x_operator_norm(h1 - h2, shape) / norm_one_inf(x1 - x2))
    return out
