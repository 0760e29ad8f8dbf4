"""Points of the Grassmann manifold as rank-N projections, tangent
coordinates, the retraction R_P(xi) = X Z^-1 X^* and its first three
derivatives.

A tangent vector at P = Y Y^* is stored by its coordinate matrix B
(N x (nu-N)); the embedded matrix is xi = sym(Y B Yperp^*).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .errors import ConsistencyError, InvalidInputError, SingularityError
from .matnorm import norm_one_inf

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
SPLIT_GAP = 1e-6
NA_TOL = 1e-9


def _h(a):
    return a.conj().T


def _hermitian_inv_sqrt(z):
    vals, vecs = np.linalg.eigh(z)
    if vals.min() <= 0.0:
        raise SingularityError("Z is not positive definite")
    return (vecs / np.sqrt(vals)) @ _h(vecs)


@dataclass(frozen=True)
class GrassmannPoint:
    """Rank-N orthogonal projection with orthonormal bases of Ran P and Ker P."""

    p: np.ndarray
    n_rank: int
    basis_y: np.ndarray
    basis_yperp: np.ndarray

    def __post_init__(self):
        for name in ("p", "basis_y", "basis_yperp"):
            arr = np.array(getattr(self, name), dtype=complex)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        nu = self.p.shape[0]
        if self.p.shape != (nu, nu):
            raise InvalidInputError("projection must be square")
        if not 0 < self.n_rank < nu:
            raise InvalidInputError(f"need 0 < N < nu, got N={self.n_rank}, nu={nu}")
        if self.basis_y.shape != (nu, self.n_rank):
            raise InvalidInputError("basis_y has the wrong shape")
        if self.basis_yperp.shape != (nu, nu - self.n_rank):
            raise InvalidInputError("basis_yperp has the wrong shape")

    @property
    def nu(self) -> int:
        return self.p.shape[0]

    @property
    def tangent_shape(self) -> Tuple[int, int]:
        return self.n_rank, self.nu - self.n_rank

    def invariant_errors(self) -> dict:
        """Deviation of each projection invariant, for diagnostics and tests."""
        p, y, yp = self.p, self.basis_y, self.basis_yperp
        eye = np.eye(self.nu)
        return {
            "hermitian": norm_one_inf(p - _h(p)),
            "idempotent": norm_one_inf(p @ p - p),
            "trace": abs(np.trace(p) - self.n_rank),
            "range": norm_one_inf(y @ _h(y) - p),
            "kernel": norm_one_inf(yp @ _h(yp) - (eye - p)),
        }

    def check(self, tol: float = HERMITIAN_TOL) -> None:
        errs = self.invariant_errors()
        limits = {k: (TRACE_TOL if k == "trace" else tol) for k in errs}
        bad = {k: v for k, v in errs.items() if v > limits[k]}
        if bad:
            raise InvalidInputError(f"not a valid Grassmann point: {bad}")

    @classmethod
    def from_projection(cls, p, n_rank: int | None = None) -> "GrassmannPoint":
        """Build a point from a projection matrix, splitting its spectrum at 1/2."""
        p = np.asarray(p, dtype=complex)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise InvalidInputError("projection must be square")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("projection has non-finite entries")
        if norm_one_inf(p - _h(p)) > 1e-8:
            raise InvalidInputError("projection is not Hermitian")
        vals, vecs = np.linalg.eigh(0.5 * (p + _h(p)))
        if np.any(np.abs(vals - 0.5) < SPLIT_GAP):
            raise InvalidInputError("eigenvalue at 1/2: cannot split range and kernel")
        occ = vals > 0.5
        n = int(occ.sum())
        if n_rank is not None and n != n_rank:
            raise InvalidInputError(f"projection has rank {n}, expected {n_rank}")
        # descending eigenvalue order keeps the occupied block first
        y = vecs[:, occ][:, ::-1]
        yp = vecs[:, ~occ][:, ::-1]
        point = cls(p, n, y, yp)
        point.check(tol=1e-8)
        return point

    @classmethod
    def from_basis(cls, y, yperp=None) -> "GrassmannPoint":
        """Build a point from an orthonormal basis of its range."""
        y = np.asarray(y, dtype=complex)
        nu, n = y.shape
        if yperp is None:
            q, _ = np.linalg.qr(np.hstack([y, np.eye(nu)]))
            yperp = q[:, n:nu]
        p = y @ _h(y)
        point = cls(0.5 * (p + _h(p)), n, y, yperp)
        point.check()
        return point


def canonical_point(n_rank: int, nu: int) -> GrassmannPoint:
    """P0 = diag(1,...,1,0,...,0) with standard-basis Y and Yperp."""
    if not 0 < n_rank < nu:
        raise InvalidInputError(f"need 0 < N < nu, got N={n_rank}, nu={nu}")
    eye = np.eye(nu, dtype=complex)
    p = np.diag([1.0] * n_rank + [0.0] * (nu - n_rank)).astype(complex)
    return GrassmannPoint(p, n_rank, eye[:, :n_rank], eye[:, n_rank:])


def random_point(n_rank: int, nu: int, rng: np.random.Generator) -> GrassmannPoint:
    """A Haar-like random point, used by tests and sampling utilities."""
    a = rng.standard_normal((nu, nu)) + 1j * rng.standard_normal((nu, nu))
    q, _ = np.linalg.qr(a)
    return GrassmannPoint.from_basis(q[:, :n_rank], q[:, n_rank:])


@dataclass(frozen=True)
class TangentCoord:
    """Coordinates B of the tangent xi = sym(Y B Yperp^*) at ``anchor``."""

    b: np.ndarray
    anchor: GrassmannPoint

    def __post_init__(self):
        b = np.array(self.b, dtype=complex)
        if b.shape != self.anchor.tangent_shape:
            raise InvalidInputError(
                f"tangent coordinates must have shape {self.anchor.tangent_shape}, "
                f"got {b.shape}"
            )
        if not np.all(np.isfinite(b)):
            raise InvalidInputError("tangent coordinates are not finite")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    def norm(self) -> float:
        """The chart norm ||xi||_X = ||B||_{1,inf}."""
        return norm_one_inf(self.b)

    def embed(self) -> np.ndarray:
        return embed_tangent(self.anchor, self.b)

    def __add__(self, other):
        return TangentCoord(self.b + _coords(self.anchor, other), self.anchor)

    def __sub__(self, other):
        return TangentCoord(self.b - _coords(self.anchor, other), self.anchor)

    def __mul__(self, scalar):
        return TangentCoord(self.b * scalar, self.anchor)

    __rmul__ = __mul__


def _coords(point: GrassmannPoint, tangent) -> np.ndarray:
    if isinstance(tangent, TangentCoord):
        if tangent.anchor is not point and not np.allclose(
            tangent.anchor.basis_y, point.basis_y
        ):
            raise InvalidInputError("tangent is anchored at a different point")
        return tangent.b
    b = np.asarray(tangent, dtype=complex)
    if b.shape != point.tangent_shape:
        raise InvalidInputError(
            f"tangent coordinates must have shape {point.tangent_shape}, got {b.shape}"
        )
    return b


def embed_tangent(point: GrassmannPoint, b) -> np.ndarray:
    """xi = (Y B Yperp^* + Yperp B^* Y^*) / 2."""
    a_part, b_part = tangent_parts(point, b)
    return 0.5 * (a_part + b_part)


def tangent_parts(point: GrassmannPoint, b) -> Tuple[np.ndarray, np.ndarray]:
    """The two halves (Y B Yperp^*, Yperp B^* Y^*) whose mean is xi.

    The second part is the one with Y^* xi_b = 0; it satisfies
    eta_jk + i * hat_eta_jk = (eta_jk)_b for the basis pair at (j, k).
    """
    b = _coords(point, b)
    y, yp = point.basis_y, point.basis_yperp
    a_part = y @ b @ _h(yp)
    return a_part, _h(a_part)


def tangent_from_matrix(point: GrassmannPoint, xi) -> np.ndarray:
    """Recover B from an embedded tangent: B = 2 Y^* xi Yperp."""
    return 2.0 * _h(point.basis_y) @ np.asarray(xi) @ point.basis_yperp


def basis_vectors(point: GrassmannPoint) -> List[TangentCoord]:
    """eta_00, hat_eta_00, eta_01, hat_eta_01, ... (row-major over (j, k)).

    eta_jk has B = E_jk and hat_eta_jk has B = i E_jk, so the real
    coordinate vector interleaves real and imaginary parts of B.
    """
    n, m = point.tangent_shape
    out = []
    for j in range(n):
        for k in range(m):
            e = np.zeros((n, m), dtype=complex)
            e[j, k] = 1.0
            out.append(TangentCoord(e, point))
            out.append(TangentCoord(1j * e, point))
    return out


def to_real(b) -> np.ndarray:
    """Interleave (Re, Im) of B in row-major order."""
    b = np.asarray(b, dtype=complex).ravel()
    out = np.empty(2 * b.size)
    out[0::2] = b.real
    out[1::2] = b.imag
    return out


def from_real(x, shape) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x[0::2] + 1j * x[1::2]).reshape(shape)


class _Chart:
    """Quantities shared by R and its derivatives at a fixed xi.

    Each direction zeta enters only through u = zeta Y, u^* and
    a = Y^*(zeta^* xi + xi^* zeta) Y. Directions are passed around as such
    triples so that the masked ("no adjoint") variant used for the
    complexified gradient can drop the terms that contain zeta^*.
    """

    def __init__(self, point: GrassmannPoint, b):
        self.point = point
        self.b = _coords(point, b)
        y = point.basis_y
        self.xi = embed_tangent(point, self.b)
        self.xy = self.xi @ y  # xi Y = Yperp B^* / 2
        self.x = y + self.xy
        z = np.eye(point.n_rank) + _h(self.xy) @ self.xy
        try:
            self.zi = np.linalg.inv(z)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise SingularityError("I + Y^* xi^* xi Y is singular") from exc
        self.z = z
        self.xz = self.x @ self.zi  # X Z^-1
        self.xzh = _h(self.xz)  # Z^-1 X^*

    def direction(self, zeta: np.ndarray, masked: bool = False):
        u = zeta @ self.point.basis_y
        if masked:
            return u, np.zeros_like(_h(u)), _h(self.xy) @ u
        uh = _h(u)
        return u, uh, uh @ self.xy + _h(self.xy) @ u

    def value(self) -> np.ndarray:
        return self.xz @ _h(self.x)

    def d1(self, d):
        u, uh, a = d
        return u @ self.xzh - self.xz @ a @ self.xzh + self.xz @ uh

    def d2_half(self, d1, d2):
        u1, uh1, a1 = d1
        u2, uh2, a2 = d2
        zi, xz, xzh = self.zi, self.xz, self.xzh
        return (
            -u1 @ zi @ a2 @ xzh
            + u1 @ zi @ uh2
            - xz @ (uh1 @ u2) @ xzh
            + xz @ a1 @ zi @ a2 @ xzh
            - xz @ a1 @ zi @ uh2
        )

    def d3_term(self, d1, d2, d3):
        u1, uh1, a1 = d1
        u2, uh2, a2 = d2
        u3, uh3, a3 = d3
        zi, xz, xzh = self.zi, self.xz, self.xzh
        return (
            -u1 @ zi @ (uh2 @ u3) @ xzh
            + u1 @ zi @ a2 @ zi @ a3 @ xzh
            - u1 @ zi @ a2 @ zi @ uh3
            + xz @ (uh1 @ u2) @ zi @ a3 @ xzh
            - xz @ (uh1 @ u2) @ zi @ uh3
            + xz @ a1 @ zi @ (uh2 @ u3) @ xzh
            - xz @ a1 @ zi @ a2 @ zi @ a3 @ xzh
            + xz @ a1 @ zi @ a2 @ zi @ uh3
        )

    def derivative(self, dirs):
        """d^m R(xi; dirs) for m = len(dirs) in {1, 2, 3}, dirs as triples."""
        m = len(dirs)
        if m == 1:
            return self.d1(dirs[0])
        if m == 2:
            return self.d2_half(dirs[0], dirs[1]) + self.d2_half(dirs[1], dirs[0])
        if m == 3:
            return sum(self.d3_term(*perm) for perm in itertools.permutations(dirs))
        raise InvalidInputError("only derivatives of order 1 to 3 are implemented")


def _check_tangent(point, b):
    return _coords(point, b)


def retract(point: GrassmannPoint, xi) -> GrassmannPoint:
    """R_P(xi) = X Z^-1 X^* with X = (I + xi) Y and Z = I + Y^* xi^* xi Y.

    The returned bases are Y' = X Z^-1/2 and
    Yperp' = (I - xi) Yperp (I + B^* B / 4)^-1/2, both orthonormal.
    """
    b = _check_tangent(point, xi)
    chart = _Chart(point, b)
    y_new = chart.x @ _hermitian_inv_sqrt(chart.z)
    xperp = point.basis_yperp - chart.xi @ point.basis_yperp
    zperp = np.eye(point.nu - point.n_rank) + 0.25 * _h(b) @ b
    yperp_new = xperp @ _hermitian_inv_sqrt(zperp)
    p = y_new @ _h(y_new)
    return GrassmannPoint(0.5 * (p + _h(p)), point.n_rank, y_new, yperp_new)


def retract_matrix(point: GrassmannPoint, xi) -> np.ndarray:
    """The literal X Z^-1 X^* without re-orthonormalizing any basis."""
    return _Chart(point, _check_tangent(point, xi)).value()


def _embedded(point, tangents):
    return [embed_tangent(point, _coords(point, t)) for t in tangents]


def dretract(point: GrassmannPoint, xi, zeta) -> np.ndarray:
    """dR_P(xi; zeta) as a nu x nu matrix."""
    chart = _Chart(point, _check_tangent(point, xi))
    (z1,) = _embedded(point, [zeta])
    return chart.derivative([chart.direction(z1)])


def d2retract(point: GrassmannPoint, xi, zeta1, zeta2) -> np.ndarray:
    """d^2 R_P(xi; zeta1, zeta2) = Rt(zeta1, zeta2) + Rt(zeta2, zeta1)."""
    chart = _Chart(point, _check_tangent(point, xi))
    z1, z2 = _embedded(point, [zeta1, zeta2])
    return chart.derivative([chart.direction(z1), chart.direction(z2)])


def d3retract(point: GrassmannPoint, xi, zeta1, zeta2, zeta3) -> np.ndarray:
    """d^3 R_P(xi; zeta1, zeta2, zeta3): the sum of Rhat over all orderings."""
    chart = _Chart(point, _check_tangent(point, xi))
    dirs = [chart.direction(z) for z in _embedded(point, [zeta1, zeta2, zeta3])]
    return chart.derivative(dirs)


def d2retract_at_zero(point: GrassmannPoint, zeta1, zeta2) -> np.ndarray:
    """Closed form at xi = 0: z1 P z2 + z2 P z1 - P z1 z2 P - P z2 z1 P."""
    z1, z2 = _embedded(point, [zeta1, zeta2])
    p = point.p
    return z1 @ p @ z2 + z2 @ p @ z1 - p @ z1 @ z2 @ p - p @ z2 @ z1 @ p


def retract_derivative(point: GrassmannPoint, xi, tangents: Sequence) -> np.ndarray:
    """d^m R_P(xi; tangents) for 1 <= m <= 3, sharing one chart evaluation."""
    chart = _Chart(point, _check_tangent(point, xi))
    return chart.derivative([chart.direction(z) for z in _embedded(point, tangents)])


@dataclass(frozen=True)
class NAResult:
    """Both evaluations of d^m f(xi; eta_jk) + i d^m f(xi; hat_eta_jk)."""

    pair: complex
    masked: complex


def na_directional(
    point: GrassmannPoint,
    xi,
    linear_functional: Callable[[np.ndarray], complex],
    j: int,
    k: int,
    others: Sequence = (),
    tol: float = NA_TOL,
) -> NAResult:
    """Complexified directional derivative along the (j, k) basis pair.

    ``linear_functional`` maps a nu x nu matrix D to a complex number and
    must be complex-linear in D (for example D -> tr(G D)); it is the
    differential of f at R_P(xi). The derivative of f o R_P of order
    m = 1 + len(others) is evaluated twice: as the pair sum
    l(d^m R(.., eta, ..)) + i l(d^m R(.., hat_eta, ..)), and with the single
    matrix (eta_jk)_b after dropping every term containing its adjoint.

    Raises ConsistencyError when the two disagree by more than ``tol``
    (relative to the larger magnitude, floored at 1).
    """
    n, m = point.tangent_shape
    if not (0 <= j < n and 0 <= k < m):
        raise InvalidInputError(f"basis index ({j}, {k}) out of range")
    e = np.zeros((n, m), dtype=complex)
    e[j, k] = 1.0
    chart = _Chart(point, _check_tangent(point, xi))
    rest = [chart.direction(z) for z in _embedded(point, others)]

    eta = embed_tangent(point, e)
    eta_hat = embed_tangent(point, 1j * e)
    pair = linear_functional(chart.derivative([chart.direction(eta)] + rest))
    pair = pair + 1j * linear_functional(
        chart.derivative([chart.direction(eta_hat)] + rest)
    )

    _, eta_b = tangent_parts(point, e)
    masked = linear_functional(
        chart.derivative([chart.direction(eta_b, masked=True)] + rest)
    )
    scale = max(1.0, abs(pair), abs(masked))
    if abs(pair - masked) > tol * scale:
        raise ConsistencyError(
            f"pair and masked evaluations differ by {abs(pair - masked):.3e}"
        )
    return NAResult(complex(pair), complex(masked))


def differential_matrix(point: GrassmannPoint, xi) -> np.ndarray:
    """Real matrix of dR_P(xi) from basis coordinates at P to those at R_P(xi)."""
    target = retract(point, xi)
    chart = _Chart(point, _check_tangent(point, xi))
    cols = []
    for t in basis_vectors(point):
        d = chart.derivative([chart.direction(t.embed())])
        cols.append(to_real(tangent_from_matrix(target, d)))
    return np.column_stack(cols)


def differential_injectivity(point: GrassmannPoint, xi) -> float:
    """Smallest singular value of dR_P(xi) in basis coordinates (1 at xi = 0)."""
    return float(np.linalg.svd(differential_matrix(point, xi), compute_uv=False).min())
