"""Operator norms used throughout: the max of the 1- and inf-norms, and its
weighted variant, plus checks and a construction for localization weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConstructionError, InvalidInputError

log = logging.getLogger(__name__)

W_SLACK = 1e-12


def norm_one_inf(a) -> float:
    """max(max column abs-sum, max row abs-sum) of a 2-D array."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise InvalidInputError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    if a.size == 0:
        return 0.0
    m = np.abs(a)
    return float(max(m.sum(axis=0).max(), m.sum(axis=1).max()))


@dataclass(frozen=True)
class WeightSet:
    """Symmetric localization weights ``w`` with optional reference points."""

    w: np.ndarray
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidInputError(f"weight matrix must be square, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("weight matrix has non-finite entries")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        if self.points is not None:
            pts = np.array(self.points, dtype=float).reshape(-1, 3)
            if pts.shape[0] != w.shape[0]:
                raise InvalidInputError("need one reference point per orbital")
            pts.setflags(write=False)
            object.__setattr__(self, "points", pts)

    @property
    def nu(self) -> int:
        return self.w.shape[0]

    @classmethod
    def uniform(cls, nu: int, value: float) -> "WeightSet":
        return cls(np.full((nu, nu), float(value)))


def norm_weighted(a, weights: WeightSet) -> float:
    """norm_one_inf of the entrywise product (w_jk a_jk)."""
    a = np.asarray(a)
    if a.shape != weights.w.shape:
        raise InvalidInputError(
            f"matrix shape {a.shape} does not match weights {weights.w.shape}"
        )
    return norm_one_inf(weights.w * a)


@dataclass(frozen=True)
class Violation:
    """One failed clause with its worst witness and the amount it fails by."""

    clause: str
    indices: Tuple[int, ...]
    margin: float

    def __str__(self):
        return f"{self.clause} at {self.indices} (excess {self.margin:.3e})"


def validate_weights(weights: WeightSet, slack: float = W_SLACK) -> List[Violation]:
    """Check symmetry, w >= 1 and both clauses of condition (W).

    Returns one entry per violated clause (empty list means valid).
    Indices are zero-based.
    """
    w = weights.w
    out = []

    asym = np.abs(w - w.T)
    if asym.max(initial=0.0) > slack:
        j, k = np.unravel_index(np.argmax(asym), asym.shape)
        out.append(Violation("symmetry", (int(j), int(k)), float(asym[j, k])))

    low = 1.0 - w
    if low.max(initial=-np.inf) > slack:
        j, k = np.unravel_index(np.argmax(low), low.shape)
        out.append(Violation("lower-bound", (int(j), int(k)), float(low[j, k])))

    inv = 1.0 / w
    rows = inv.sum(axis=1) - 1.0
    if rows.size and rows.max() > slack:
        j = int(np.argmax(rows))
        out.append(Violation("W(i)", (j,), float(rows[j])))

    # excess[j,k,l] = w_jk^-1 w_kl^-1 - w_jl^-1
    excess = inv[:, :, None] * inv[None, :, :] - inv[:, None, :]
    if excess.size and excess.max() > slack:
        j, k, l = np.unravel_index(np.argmax(excess), excess.shape)
        out.append(
            Violation("W(ii)", (int(j), int(k), int(l)), float(excess[j, k, l]))
        )
    return out


def _weights_at_scale(dist_s: np.ndarray, scale: float) -> Optional[np.ndarray]:
    """Off-diagonal max(1, scale*d^s) with the diagonal closing clause (i).

    Returns None when the off-diagonal row sums alone already reach 1.
    """
    nu = dist_s.shape[0]
    off = np.maximum(1.0, scale * dist_s)
    np.fill_diagonal(off, np.inf)
    rowsum = (1.0 / off).sum(axis=1).max() if nu > 1 else 0.0
    if rowsum >= 1.0:
        return None
    w = off.copy()
    np.fill_diagonal(w, 1.0 / (1.0 - rowsum))
    return w


def weights_from_points(points, exponent: float, iterations: int = 64) -> WeightSet:
    """Weights w_jk = max(1, c |q_j - q_k|^s) with the smallest admissible c.

    The diagonal gets the common value 1/(1 - max_j sum_{k != j} w_jk^-1),
    the smallest value that closes clause (W)(i). The global scale c is
    found by bisection in log space; the result is always re-validated.

    Raises ConstructionError when no scale gives a valid weight matrix,
    e.g. for coincident points.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if exponent <= 1.0:
        raise InvalidInputError("exponent must exceed 1")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("points must be finite")
    nu = pts.shape[0]
    if nu == 0:
        raise InvalidInputError("need at least one point")
    if nu == 1:
        return WeightSet(np.ones((1, 1)), pts)

    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    dist_s = dist**exponent

    def feasible(log_c):
        w = _weights_at_scale(dist_s, float(np.exp(log_c)))
        if w is None:
            return None
        if validate_weights(WeightSet(w)):
            return None
        return w

    hi = 0.0
    while feasible(hi) is None:
        hi += 2.0
        if hi > 700.0:
            clause = "W(i)" if np.any(dist[~np.eye(nu, dtype=bool)] == 0) else "W(ii)"
            raise ConstructionError(
                "no weight scale satisfies condition (W) for these points", clause
            )
    lo = hi - 2.0 if hi > 0.0 else -700.0
    if feasible(lo) is not None:
        hi = lo
    else:
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if feasible(mid) is None:
                lo = mid
            else:
                hi = mid
    w = feasible(hi)
    log.debug("weights_from_points: scale=%.6g", np.exp(hi))
    result = WeightSet(w, pts)
    bad = validate_weights(result)
    if bad:  # defensive, feasible() already validated
        raise ConstructionError(f"constructed weights fail {bad[0]}", bad[0].clause)
    return result
