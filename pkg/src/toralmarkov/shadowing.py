"""Shadowing of finite pseudo-orbits for linear hyperbolic maps.

For ``q_{n+1} = f(q_n) + e_n`` the true orbit ``x_n = q_n + d_n`` must solve
``d_{n+1} = A d_n - e_n``.  Splitting along the eigenlines gives one
recursion run forwards (stable part, contracting) and one run backwards
(unstable part, contracting under ``A^{-1}``); with zero defects outside the
window both sums are finite and exact.  All of this is done in the exact
chart of :class:`~toralmarkov.torus.ToralAutomorphism`, because a float
shadow point cannot be checked 50 steps ahead: ``2.618**50`` amplifies the
last bit of a double far past any useful tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .quadratic import QNum, qfloor
from .torus import ToralAutomorphism, TorusPoint, reduce_exact

__all__ = [
    "DefectTooLarge",
    "DenseNet",
    "PseudoOrbit",
    "ShadowResult",
    "WindowTooSmall",
    "defect",
    "expansivity_constant",
    "gamma_net",
    "orbit_distances",
    "pseudo_orbit",
    "shadow",
    "verify_shadow",
]

# rounding slack added to certified bounds (float conversion of exact values)
_FLOAT_SLACK = 1e-12


class WindowTooSmall(ValueError):
    """Truncation error of the window dominates the certified bound."""


class DefectTooLarge(ValueError):
    """Certified shadowing distance would reach 1/4."""


def _exact(f: ToralAutomorphism, p) -> tuple[QNum, QNum]:
    if isinstance(p, TorusPoint):
        return f.q(p.x), f.q(p.y)
    x, y = p
    return f.q(x), f.q(y)


def _nearest_lift(dx: QNum, dy: QNum) -> tuple[QNum, QNum]:
    half = QNum(0.5)
    return dx - qfloor(dx + half), dy - qfloor(dy + half)


def _defects_exact(f: ToralAutomorphism, pts: Sequence[tuple[QNum, QNum]]):
    out = []
    for p, q in zip(pts, pts[1:]):
        fx, fy = f.map_exact(*p)
        out.append(_nearest_lift(q[0] - fx, q[1] - fy))
    return out


def defect(f: ToralAutomorphism, points: Sequence[TorusPoint]) -> tuple[np.ndarray, float]:
    """Step defects ``q_{n+1} - f(q_n)`` (nearest lift) and their maximum norm.

    Returns an ``(n-1, 2)`` array of Cartesian defect vectors and ``delta``.
    The defects are evaluated exactly, so a true orbit of dyadic points gives
    zeros, not rounding noise.
    """
    if len(points) < 2:
        raise ValueError("need at least two points")
    pts = [_exact(f, p) for p in points]
    e = np.array([[float(a), float(b)] for a, b in _defects_exact(f, pts)])
    return e, float(np.max(np.hypot(e[:, 0], e[:, 1])))


@dataclass(frozen=True)
class PseudoOrbit:
    """Points ``q_{-N} .. q_N`` with certified maximal step defect ``delta``."""

    window: int
    points: tuple[TorusPoint, ...]
    delta: float

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window half-width must be >= 1")
        if len(self.points) != 2 * self.window + 1:
            raise ValueError(f"expected {2 * self.window + 1} points, got {len(self.points)}")

    def __getitem__(self, n: int) -> TorusPoint:
        if abs(n) > self.window:
            raise IndexError(n)
        return self.points[n + self.window]

    def shifted(self) -> PseudoOrbit:
        """``sigma q`` on a finite window: recentred at ``q_1``, half-width ``N-1``."""
        if self.window < 2:
            raise ValueError("cannot shift a window of half-width 1")
        return PseudoOrbit(self.window - 1, self.points[2:], self.delta)

    def truncated(self, window: int) -> PseudoOrbit:
        k = self.window - window
        if k < 0:
            raise ValueError("cannot widen a window")
        pts = self.points[k: len(self.points) - k]
        return PseudoOrbit(window, pts, self.delta)


def pseudo_orbit(f: ToralAutomorphism, points: Sequence[TorusPoint]) -> PseudoOrbit:
    """Wrap ``2N+1`` points as a pseudo-orbit, measuring its defect."""
    if len(points) % 2 == 0:
        raise ValueError("a centred window needs an odd number of points")
    _, delta = defect(f, points)
    return PseudoOrbit(len(points) // 2, tuple(points), delta)


@dataclass(frozen=True)
class ShadowResult:
    """The orbit point tracking a pseudo-orbit at index 0.

    ``point`` is the rounded TorusPoint; ``point_exact`` is the exact value
    that :func:`verify_shadow` should be handed for long windows.
    """

    point: TorusPoint
    beta_certified: float
    tail_bound: float
    point_exact: tuple[QNum, QNum] = field(repr=False)
    deviations: np.ndarray = field(repr=False)


def _tail(f: ToralAutomorphism, delta: float, window: int) -> float:
    """Distance at index 0 to the shadow of any bi-infinite delta-extension."""
    r_u, r_s = np.linalg.norm(f.basis_inverse, axis=1)
    lu, ls = abs(f.lambda_u), abs(f.lambda_s)
    stable = r_s * delta * ls ** window / (1.0 - ls)
    unstable = r_u * delta * lu ** (-window) / (lu - 1.0)
    return float(stable + unstable)


def shadow(f: ToralAutomorphism, q: PseudoOrbit) -> ShadowResult:
    """Exact shadow of a finite pseudo-orbit.

    ``beta_certified`` is the largest realised deviation over the window plus
    the tail bound; it never exceeds ``delta * max(1/(1-|l_s|), 1/(|l_u|-1))``
    by more than the tail for defects spread along a single eigenline, and is
    usually far below it.
    """
    N = q.window
    pts = [_exact(f, p) for p in q.points]
    e = [f.chart_coords(*v) for v in _defects_exact(f, pts)]
    zero = f.q(0)
    # stable part forwards from the left edge, unstable part backwards from the right edge
    ds = [zero] * (2 * N + 1)
    du = [zero] * (2 * N + 1)
    for i in range(2 * N):
        ds[i + 1] = ds[i] * f.lam_s - e[i][1]
    for i in range(2 * N - 1, -1, -1):
        du[i] = (du[i + 1] + e[i][0]) / f.lam_u
    dev = np.array([np.linalg.norm(f.unit_vector(float(u) * f.norm_u, float(s) * f.norm_s)) for u, s in zip(du, ds)])
    tail = _tail(f, q.delta, N)
    beta = float(dev.max()) + tail + _FLOAT_SLACK
    if beta >= 0.25:
        raise DefectTooLarge(f"certified shadowing distance {beta:.3g} >= 1/4")
    if q.delta > 0 and tail > beta / 10:
        raise WindowTooSmall(f"tail bound {tail:.3g} exceeds a tenth of {beta:.3g}")
    vx, vy = f.chart_vector(du[N], ds[N])
    x0 = reduce_exact(pts[N][0] + vx, pts[N][1] + vy)
    return ShadowResult(TorusPoint(float(x0[0]), float(x0[1])), beta, tail, x0, dev)


def orbit_distances(f: ToralAutomorphism, q: PseudoOrbit, x) -> np.ndarray:
    """``dist(f^n x, q_n)`` for ``|n| <= N`` with the orbit of ``x`` iterated exactly."""
    N = q.window
    start = _exact(f, x)
    out = np.empty(2 * N + 1)
    fwd = start
    back = start
    for n in range(N + 1):
        for idx, p in ((N + n, fwd), (N - n, back)):
            qq = _exact(f, q.points[idx])
            dx, dy = _nearest_lift(qq[0] - p[0], qq[1] - p[1])
            out[idx] = math.hypot(float(dx), float(dy))
        fwd = reduce_exact(*f.map_exact(*fwd))
        back = reduce_exact(*f.map_inverse_exact(*back))
    return out


def verify_shadow(f: ToralAutomorphism, q: PseudoOrbit, x, beta: float) -> bool:
    """True iff ``dist(f^n x, q_n) <= beta`` for every ``|n| <= N``."""
    return bool(np.all(orbit_distances(f, q, x) <= beta))


def expansivity_constant(f: ToralAutomorphism) -> float:
    """A valid expansivity constant for every linear hyperbolic map: 1/4.

    Two orbits that stay within 1/4 never need to change lift, so their
    difference is a linear orbit of ``A``; its unstable (resp. stable)
    component grows under forward (resp. backward) iteration unless zero.
    """
    return 0.25


@dataclass(frozen=True)
class DenseNet:
    """Regular ``side x side`` grid of centres; every point is within ``gamma``."""

    gamma: float
    side: int

    @property
    def spacing(self) -> float:
        return 1.0 / self.side

    def __len__(self) -> int:
        return self.side * self.side

    def point(self, index: int) -> TorusPoint:
        i, j = divmod(index, self.side)
        return TorusPoint(i / self.side, j / self.side)

    @property
    def points(self) -> list[TorusPoint]:
        return [self.point(k) for k in range(len(self))]

    def nearest(self, p: TorusPoint) -> int:
        i = int(round(p.x * self.side)) % self.side
        j = int(round(p.y * self.side)) % self.side
        return i * self.side + j


def gamma_net(gamma: float) -> DenseNet:
    """Grid with spacing at most ``gamma*sqrt(2)``."""
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    side = math.ceil(1.0 / (gamma * math.sqrt(2.0)))
    return DenseNet(gamma, side)
