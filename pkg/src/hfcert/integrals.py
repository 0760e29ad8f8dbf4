"""Integral data: one-electron matrices, nuclear attraction and the
two-electron tensor, with validation, basis changes and a synthetic
generator for localized test instances.

Index convention: ``eri[j, k, l, m]`` is [jk|lm], the integral of
phi_j^* phi_k (1/|x-y|) phi_l^* phi_m. One-electron matrices store
<phi_a, O phi_b> at (a, b). Code outside this module goes through the
accessors below instead of indexing ``eri`` directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidInputError
from .matnorm import WeightSet

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
DECOMPOSITION_TOL = 1e-10


def _frozen(a, dtype=complex):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class IntegralSet:
    nu: int
    n_elec: int
    h: np.ndarray
    kinetic: np.ndarray
    attraction: np.ndarray
    eri: np.ndarray
    charges: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        nu = int(self.nu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "n_elec", int(self.n_elec))
        h = _frozen(self.h)
        kin = _frozen(self.kinetic)
        att = _frozen(self.attraction)
        if att.ndim == 2:
            att = _frozen(att[None])
        eri = _frozen(self.eri)
        if h.shape != (nu, nu) or kin.shape != (nu, nu):
            raise InvalidInputError("one-electron matrices must be nu x nu")
        if att.ndim != 3 or att.shape[1:] != (nu, nu):
            raise InvalidInputError("attraction must have shape (n_nuclei, nu, nu)")
        if eri.shape != (nu,) * 4:
            raise InvalidInputError("eri must have shape (nu, nu, nu, nu)")
        for name, arr in (("h", h), ("kinetic", kin), ("attraction", att), ("eri", eri)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} has non-finite entries")
        charges = _frozen(np.asarray(self.charges).reshape(-1), dtype=float)
        positions = _frozen(np.asarray(self.positions, dtype=float).reshape(-1, 3), float)
        n_nuc = att.shape[0]
        if charges.size == 0 and n_nuc:
            charges = _frozen(np.ones(n_nuc), float)
        if positions.shape[0] == 0 and n_nuc:
            positions = _frozen(np.zeros((n_nuc, 3)), float)
        if charges.shape[0] != n_nuc or positions.shape[0] != n_nuc:
            raise InvalidInputError("need one charge and one position per nucleus")
        for name, val in (("h", h), ("kinetic", kin), ("attraction", att),
                          ("eri", eri), ("charges", charges), ("positions", positions)):
            object.__setattr__(self, name, val)

    @property
    def n_nuclei(self) -> int:
        return self.attraction.shape[0]

    @cached_property
    def two_electron_operator(self) -> np.ndarray:
        """nu^2 x nu^2 matrix G with vec(G(D)) = G @ vec(D), row-major vec.

        G(D)_{kj} = sum_{lm} D_{lm} ([kj|ml] - [kl|mj]); the Fock matrix is
        h + G(P) and the second differential of the energy is tr(D1 G(D2)).
        """
        direct = self.eri.transpose(0, 1, 3, 2)  # [k,j,l,m] -> [kj|ml]
        exchange = self.eri.transpose(0, 3, 1, 2)  # [k,j,l,m] -> [kl|mj]
        g = (direct - exchange).reshape(self.nu**2, self.nu**2)
        g.setflags(write=False)
        return g

    def apply_two_electron(self, d) -> np.ndarray:
        d = np.asarray(d)
        return (self.two_electron_operator @ d.reshape(-1)).reshape(self.nu, self.nu)


def eri_value(integrals: IntegralSet, j: int, k: int, l: int, m: int) -> complex:
    """[jk|lm]."""
    return complex(integrals.eri[j, k, l, m])


def antisym(integrals: IntegralSet, j: int, l: int, k: int, m: int) -> complex:
    """<jl||km> = [jk|lm] - [jm|lk]."""
    nu = integrals.nu
    if not all(0 <= i < nu for i in (j, l, k, m)):
        raise InvalidInputError("orbital index out of range")
    return eri_value(integrals, j, k, l, m) - eri_value(integrals, j, m, l, k)


def pair_exchange_gap(integrals: IntegralSet) -> np.ndarray:
    """Matrix of <kj||kj> = [kk|jj] - [kj|jk] indexed as (k, j)."""
    e = integrals.eri
    direct = np.einsum("kkjj->kj", e)
    exchange = np.einsum("kjjk->kj", e)
    return direct - exchange


def eri_abs(integrals: IntegralSet) -> np.ndarray:
    """|[jk|lm]| as a real array in (j, k, l, m) order."""
    return np.abs(integrals.eri)


@dataclass(frozen=True)
class Issue:
    check: str
    indices: Tuple[int, ...]
    magnitude: float

    def __str__(self):
        return f"{self.check} at {self.indices}: {self.magnitude:.3e}"


def _worst(check, diff, tol, out):
    if diff.size and diff.max() > tol:
        idx = np.unravel_index(np.argmax(diff), diff.shape)
        out.append(Issue(check, tuple(int(i) for i in idx), float(diff[idx])))


def validate(integrals: IntegralSet, tol: float = SYMMETRY_TOL) -> List[Issue]:
    """Report every violated invariant with its worst witness (zero-based)."""
    out: List[Issue] = []
    i = integrals
    if not 0 < i.n_elec < i.nu:
        out.append(Issue("electron-count", (i.n_elec, i.nu), float(i.n_elec)))
    _worst("h-hermitian", np.abs(i.h - i.h.conj().T), tol, out)
    _worst("kinetic-hermitian", np.abs(i.kinetic - i.kinetic.conj().T), tol, out)
    if i.n_nuclei:
        _worst("attraction-hermitian",
               np.abs(i.attraction - i.attraction.conj().transpose(0, 2, 1)), tol, out)
    if np.any(i.charges <= 0):
        out.append(Issue("charge-positive", (int(np.argmin(i.charges)),),
                         float(i.charges.min())))
    _worst("eri-conjugation", np.abs(i.eri - i.eri.transpose(1, 0, 3, 2).conj()), tol, out)
    _worst("eri-exchange", np.abs(i.eri - i.eri.transpose(2, 3, 0, 1)), tol, out)
    resid = i.h - (i.kinetic - i.attraction.sum(axis=0))
    scale = max(1.0, float(np.abs(i.h).max(initial=0.0)))
    _worst("h-decomposition", np.abs(resid) / scale, DECOMPOSITION_TOL, out)
    return out


def transform_basis(integrals: IntegralSet, c) -> IntegralSet:
    """Integrals in the basis phi_a = sum_k c[a, k] phi'_k.

    One-electron matrices become conj(C) O C^T (equal to C O C^* for real
    C) and eri'_{abcd} = sum conj(C_aj) C_bk conj(C_cl) C_dm [jk|lm].
    """
    c = np.asarray(c, dtype=complex)
    nu = integrals.nu
    if c.shape != (nu, nu):
        raise InvalidInputError(f"transform must be {nu} x {nu}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("transform has non-finite entries")
    if np.linalg.matrix_rank(c) < nu:
        raise InvalidInputError("transform is singular")
    cc = c.conj()

    def one(o):
        return cc @ o @ c.T

    eri = np.einsum("aj,bk,cl,dm,jklm->abcd", cc, c, cc, c, integrals.eri, optimize=True)
    att = np.einsum("aj,njk,bk->nab", cc, integrals.attraction, c, optimize=True)
    return replace(integrals, h=one(integrals.h), kinetic=one(integrals.kinetic),
                   attraction=att, eri=eri)


@dataclass(frozen=True)
class SyntheticParams:
    """Targets for generate_synthetic.

    gap: Fock gap gamma between occupied and virtual diagonals.
    coupling: occupied-virtual Fock coupling eps (max row/column sum).
    decay: exponential decay rate of every entry with index distance.
    mixing: within-block Fock coupling delta; defaults to ``coupling``.
    eri_scale, attraction_scale: magnitudes of the interaction tensors.
    """

    gap: float = 1.0
    coupling: float = 0.005
    decay: float = 1.5
    mixing: Optional[float] = None
    eri_scale: float = 0.02
    attraction_scale: float = 0.05

    def __post_init__(self):
        if not self.gap > 0:
            raise InvalidInputError("gap must be positive")
        if self.coupling < 0 or (self.mixing is not None and self.mixing < 0):
            raise InvalidInputError("coupling and mixing must be nonnegative")
        if not self.decay > 0:
            raise InvalidInputError("decay must be positive")
        if self.eri_scale < 0 or self.attraction_scale < 0:
            raise InvalidInputError("scales must be nonnegative")


def synthetic_weights(nu: int, decay: float) -> WeightSet:
    """w_jk = coth(decay/2) exp(decay |j-k|), which satisfies (W) exactly.

    Clause (i): the row sum of w^-1 is below tanh(decay/2) coth(decay/2) = 1.
    Clause (ii) follows from the triangle inequality since the prefactor is >= 1.
    """
    idx = np.arange(nu)
    dist = np.abs(idx[:, None] - idx[None, :])
    w0 = 1.0 / np.tanh(0.5 * decay)
    points = np.zeros((nu, 3))
    points[:, 0] = idx
    return WeightSet(w0 * np.exp(decay * dist), points)


def _random_phase(rng, shape):
    return np.exp(2j * np.pi * rng.random(shape))


def _block_with_sums(rng, rows, cols, env, target):
    """Random complex block with envelope ``env`` rescaled so its max
    row/column absolute sum equals ``target``."""
    if rows.size == 0 or cols.size == 0 or target == 0:
        return np.zeros((rows.size, cols.size), dtype=complex)
    blk = rng.uniform(0.5, 1.0, env.shape) * env * _random_phase(rng, env.shape)
    a = np.abs(blk)
    norm = max(a.sum(axis=0).max(), a.sum(axis=1).max())
    if norm == 0:
        return np.zeros_like(blk)
    return blk * (target / norm)


def generate_synthetic(
    seed: int, nu: int, n_elec: int, params: SyntheticParams = SyntheticParams()
) -> Tuple[IntegralSet, WeightSet]:
    """Deterministic localized test instance.

    The Fock matrix at P0 is prescribed: occupied diagonal -gap/2,
    virtual diagonal raised so that the (OI) gap equals ``gap`` exactly,
    occupied-virtual coupling with max row/column sum ``coupling`` and
    within-block coupling ``mixing``. Interaction tensors decay as
    exp(-decay * index distance); h is then solved from the prescribed
    Fock matrix and the kinetic matrix from h and the attraction.
    """
    if not 0 < n_elec < nu:
        raise InvalidInputError(f"need 0 < N < nu, got N={n_elec}, nu={nu}")
    if not isinstance(params, SyntheticParams):
        params = SyntheticParams(**params)
    rng = np.random.default_rng(seed)
    weights = synthetic_weights(nu, params.decay)
    idx = np.arange(nu, dtype=float)
    d = np.abs(idx[:, None] - idx[None, :])

    # two-electron tensor averaged over the symmetry group of [jk|lm]
    j, k, l, m = np.meshgrid(*(idx,) * 4, indexing="ij")
    spread = (np.abs(j - l) + np.abs(k - m) + np.abs(j - m) + np.abs(k - l)) / 4.0
    env = np.exp(-params.decay * (np.abs(j - k) + np.abs(l - m) + spread))
    raw = rng.uniform(0.0, 1.0, env.shape) * env * _random_phase(rng, env.shape)
    raw = 0.5 * (raw + raw.transpose(2, 3, 0, 1))
    eri = params.eri_scale * 0.5 * (raw + raw.transpose(1, 0, 3, 2).conj())

    # one nucleus per orbital centre, unit charge
    positions = weights.points.copy()
    att = np.empty((nu, nu, nu), dtype=complex)
    for n in range(nu):
        env1 = np.exp(-params.decay * (d + 0.5 * (np.abs(idx[:, None] - n)
                                                    + np.abs(idx[None, :] - n))))
        blk = rng.uniform(0.0, 1.0, (nu, nu)) * env1 * _random_phase(rng, (nu, nu))
        blk = 0.5 * (blk + blk.conj().T)
        np.fill_diagonal(blk, np.abs(np.diag(blk)))
        att[n] = params.attraction_scale * blk

    occ = np.arange(n_elec)
    vir = np.arange(n_elec, nu)
    mixing = params.coupling if params.mixing is None else params.mixing
    fock = np.zeros((nu, nu), dtype=complex)
    fock[np.ix_(occ, vir)] = _block_with_sums(
        rng, occ, vir, np.exp(-params.decay * d[np.ix_(occ, vir)]), params.coupling)
    for blk in (occ, vir):
        env_b = np.exp(-params.decay * d[np.ix_(blk, blk)])
        np.fill_diagonal(env_b, 0.0)
        b = _block_with_sums(rng, blk, blk, env_b, mixing)
        fock[np.ix_(blk, blk)] = 0.5 * (b + b.conj().T)
    fock[np.ix_(vir, occ)] = fock[np.ix_(occ, vir)].conj().T

    shell = IntegralSet(nu, n_elec, np.zeros((nu, nu)), np.zeros((nu, nu)),
                        att, eri, np.ones(nu), positions)
    exch = pair_exchange_gap(shell).real  # (k, j) -> <kj||kj>
    fock[occ, occ] = -0.5 * params.gap
    spread_v = 0.1 * params.gap * np.arange(vir.size) / max(1, vir.size)
    fock[vir, vir] = (0.5 * params.gap + exch[np.ix_(vir, occ)].max(axis=1)
                      + spread_v)

    p0 = np.zeros((nu, nu))
    p0[occ, occ] = 1.0
    h = fock - shell.apply_two_electron(p0)
    h = 0.5 * (h + h.conj().T)
    kinetic = h + att.sum(axis=0)
    result = IntegralSet(nu, n_elec, h, kinetic, att, eri, np.ones(nu), positions)
    log.debug("generate_synthetic(seed=%d, nu=%d, N=%d)", seed, nu, n_elec)
    return result, weights
