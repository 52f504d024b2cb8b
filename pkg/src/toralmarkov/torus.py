"""Linear hyperbolic automorphisms of the 2-torus.

Points are floats reduced into ``[0, 1)``.  Every automorphism also carries an
exact eigen-chart in Q(sqrt(D)) (see :mod:`toralmarkov.quadratic`): chart
vectors ``w_u`` and ``w_s`` are the integer-friendly eigenvectors
``sign(b) * (b, lambda - a)``, and ``e_u = w_u / |w_u|`` is the unit vector
used by every float-valued API.  Coordinates along ``w_u``/``w_s`` are called
*chart coordinates*; coordinates along ``e_u``/``e_s`` are *unit coordinates*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from gmpy2 import mpq

from .quadratic import QNum, qfloor, to_q

__all__ = [
    "AmbiguousLift",
    "Displacement",
    "NotHyperbolic",
    "NotUnimodular",
    "ToralAutomorphism",
    "TorusPoint",
    "apply",
    "apply_inverse",
    "displacement",
    "hyperbolicity_constants",
    "iterate",
    "make_automorphism",
    "parse_matrix",
    "torus_distance",
]


class NotUnimodular(ValueError):
    """Matrix determinant is not +1 or -1."""


class NotHyperbolic(ValueError):
    """Matrix has an eigenvalue of modulus one."""


class AmbiguousLift(ValueError):
    """A Cartesian component of a torus difference is exactly +-1/2."""


def _reduce(v: float) -> float:
    r = v % 1.0
    # -tiny % 1.0 rounds to 1.0
    return 0.0 if r >= 1.0 else r


@dataclass(frozen=True)
class TorusPoint:
    """A point of R^2/Z^2; coordinates are stored reduced into [0, 1)."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _reduce(float(self.x)))
        object.__setattr__(self, "y", _reduce(float(self.y)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Displacement:
    """Unit eigen-coordinates ``(du, ds)`` of the nearest lift of ``q - p``."""

    du: float
    ds: float
    lift: tuple[float, float]
    ambiguous: bool = False


@dataclass(frozen=True, eq=False)
class ToralAutomorphism:
    """A hyperbolic element of GL(2, Z) acting on the torus.

    ``lambda_u`` and ``lambda_s`` keep their signs (a negative trace gives
    negative eigenvalues); ``|lambda_u| > 1 > |lambda_s|`` always holds.
    """

    matrix: tuple[tuple[int, int], tuple[int, int]]
    det: int
    lambda_u: float
    lambda_s: float
    e_u: np.ndarray = field(repr=False)
    e_s: np.ndarray = field(repr=False)
    # exact data
    radicand: int = field(repr=False)
    lam_u: QNum = field(repr=False)
    lam_s: QNum = field(repr=False)
    w_u: tuple[QNum, QNum] = field(repr=False)
    w_s: tuple[QNum, QNum] = field(repr=False)
    norm_u: float = field(repr=False)
    norm_s: float = field(repr=False)

    def __eq__(self, other):
        return isinstance(other, ToralAutomorphism) and self.matrix == other.matrix

    def __hash__(self):
        return hash(self.matrix)

    # -- float helpers ---------------------------------------------------
    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    @property
    def inverse_matrix(self) -> tuple[tuple[int, int], tuple[int, int]]:
        (a, b), (c, d) = self.matrix
        k = self.det  # det = +-1, so 1/det = det
        return ((d * k, -b * k), (-c * k, a * k))

    @property
    def basis(self) -> np.ndarray:
        """Columns ``e_u``, ``e_s``."""
        return np.column_stack([self.e_u, self.e_s])

    @cached_property
    def basis_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.basis)

    @cached_property
    def operator_norm(self) -> float:
        return float(np.linalg.norm(self.array, 2))

    @property
    def contraction(self) -> float:
        """``max(|lambda_s|, 1/|lambda_u|)``."""
        return max(abs(self.lambda_s), 1.0 / abs(self.lambda_u))

    def unit_coords(self, vec) -> tuple[float, float]:
        """Unit eigen-coordinates of a Cartesian vector."""
        du, ds = self.basis_inverse @ np.asarray(vec, dtype=float)
        return float(du), float(ds)

    def unit_vector(self, du: float, ds: float) -> np.ndarray:
        return du * self.e_u + ds * self.e_s

    # -- exact chart -----------------------------------------------------
    def q(self, x) -> QNum:
        return to_q(x, self.radicand)

    def chart_coords(self, vx, vy) -> tuple[QNum, QNum]:
        """Exact chart coordinates ``(u, s)`` with ``v = u*w_u + s*w_s``."""
        (ux, uy), (sx, sy) = self.w_u, self.w_s
        det = ux * sy - sx * uy
        u = (vx * sy - sx * vy) / det
        s = (ux * vy - vx * uy) / det
        return u, s

    def chart_vector(self, u, s) -> tuple[QNum, QNum]:
        (ux, uy), (sx, sy) = self.w_u, self.w_s
        return u * ux + s * sx, u * uy + s * sy

    @property
    def chart_area(self) -> QNum:
        """Area of the unit chart square ``|det(w_u, w_s)|``."""
        (ux, uy), (sx, sy) = self.w_u, self.w_s
        return abs(ux * sy - sx * uy)

    def map_exact(self, x, y) -> tuple[QNum, QNum]:
        """Exact image of a lifted point (no reduction)."""
        (a, b), (c, d) = self.matrix
        return x * a + y * b, x * c + y * d

    def map_inverse_exact(self, x, y) -> tuple[QNum, QNum]:
        (a, b), (c, d) = self.inverse_matrix
        return x * a + y * b, x * c + y * d


def reduce_exact(x, y) -> tuple[QNum, QNum]:
    """Reduce an exact lifted point into [0, 1)^2."""
    return x - qfloor(x), y - qfloor(y)


def parse_matrix(text: str) -> tuple[tuple[int, int], tuple[int, int]]:
    """Parse ``"a,b,c,d"`` (row-major)."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError(f"expected four comma-separated integers, got {text!r}")
    a, b, c, d = (int(p) for p in parts)
    return ((a, b), (c, d))


def make_automorphism(m: Sequence[Sequence[int]]) -> ToralAutomorphism:
    """Validate an integer matrix and attach its eigen-splitting.

    Raises NotUnimodular when ``|det| != 1`` and NotHyperbolic when an
    eigenvalue lies on the unit circle.
    """
    rows = [list(r) for r in m]
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise ValueError("matrix must be 2x2")
    for v in (v for r in rows for v in r):
        if isinstance(v, bool) or not float(v).is_integer():
            raise ValueError(f"matrix entries must be integers, got {v!r}")
    (a, b), (c, d) = ((int(rows[0][0]), int(rows[0][1])), (int(rows[1][0]), int(rows[1][1])))
    det = a * d - b * c
    if abs(det) != 1:
        raise NotUnimodular(f"det = {det}, expected +-1")
    tr = a + d
    disc = tr * tr - 4 * det
    r = math.isqrt(disc) if disc >= 0 else -1
    if disc <= 0 or r * r == disc:
        # complex pair on the unit circle, or rational (hence +-1) eigenvalues
        raise NotHyperbolic(f"matrix {((a, b), (c, d))} is not hyperbolic (trace {tr}, det {det})")
    sgn_tr = 1 if tr > 0 else -1
    lam_u = QNum(mpq(tr, 2), mpq(sgn_tr, 2), disc)
    lam_s = QNum(lam_u.a, -lam_u.b, disc)
    # b != 0: b == 0 forces integer eigenvalues a, d, excluded above
    sb = 1 if b > 0 else -1
    w_u = (QNum(sb * b, 0, disc), (lam_u - a) * sb)
    w_s = (QNum(sb * b, 0, disc), (lam_s - a) * sb)
    wu = np.array([float(w_u[0]), float(w_u[1])])
    ws = np.array([float(w_s[0]), float(w_s[1])])
    nu, ns = float(np.linalg.norm(wu)), float(np.linalg.norm(ws))
    return ToralAutomorphism(
        matrix=((a, b), (c, d)),
        det=det,
        lambda_u=float(lam_u),
        lambda_s=float(lam_s),
        e_u=wu / nu,
        e_s=ws / ns,
        radicand=disc,
        lam_u=lam_u,
        lam_s=lam_s,
        w_u=w_u,
        w_s=w_s,
        norm_u=nu,
        norm_s=ns,
    )


def apply(f: ToralAutomorphism, p: TorusPoint) -> TorusPoint:
    """``(matrix @ p) mod 1``."""
    (a, b), (c, d) = f.matrix
    return TorusPoint(a * p.x + b * p.y, c * p.x + d * p.y)


def apply_inverse(f: ToralAutomorphism, p: TorusPoint) -> TorusPoint:
    (a, b), (c, d) = f.inverse_matrix
    return TorusPoint(a * p.x + b * p.y, c * p.x + d * p.y)


def iterate(f: ToralAutomorphism, p: TorusPoint, n: int) -> TorusPoint:
    """``f^n(p)`` for any integer ``n``."""
    step = apply if n >= 0 else apply_inverse
    for _ in range(abs(n)):
        p = step(f, p)
    return p


def _nearest(d: float) -> tuple[float, bool]:
    d = d - math.floor(d + 0.5)
    if d == 0.5:
        return -0.5, True
    return d, d == -0.5


def displacement(f: ToralAutomorphism, p: TorusPoint, q: TorusPoint, strict: bool = True) -> Displacement:
    """Unit eigen-coordinates of the nearest lift of ``q - p``.

    With ``strict`` a component equal to +-1/2 raises AmbiguousLift; otherwise
    the tie goes to -1/2 and the result is flagged ``ambiguous``.
    """
    dx, amb_x = _nearest(q.x - p.x)
    dy, amb_y = _nearest(q.y - p.y)
    ambiguous = amb_x or amb_y
    if ambiguous and strict:
        raise AmbiguousLift(f"difference between {p} and {q} has a component at +-1/2")
    du, ds = f.unit_coords((dx, dy))
    return Displacement(du, ds, (dx, dy), ambiguous)


def torus_distance(p: TorusPoint, q: TorusPoint) -> float:
    """Flat distance on R^2/Z^2."""
    dx = abs(q.x - p.x) % 1.0
    dy = abs(q.y - p.y) % 1.0
    return math.hypot(min(dx, 1.0 - dx), min(dy, 1.0 - dy))


def hyperbolicity_constants(f: ToralAutomorphism) -> tuple[float, float]:
    """Anosov constants ``(K, lambda)``.

    The eigenbasis is adapted, so ``|f^n s| = |lambda_s|^n |s|`` on the
    stable line and ``K = 1``.
    """
    return 1.0, f.contraction
