"""Product rectangles in the eigen-chart and finite unions of them.

A rectangle is ``{base + u*w_u + s*w_s : u in iu, s in is_}`` reduced mod 1,
with every number exact in Q(sqrt(D)).  Points are located in a rectangle's
chart through the lift nearest to its centre; this is the right lift for any
point of the rectangle as long as the rectangle's diameter stays below 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .local_product import FiberSegment
from .quadratic import QNum
from .torus import ToralAutomorphism, TorusPoint, reduce_exact

__all__ = [
    "BoxComplex",
    "ChartConflict",
    "NotInRectangle",
    "Rectangle",
    "chart_offset",
    "contains",
    "exact_point",
    "image_rectangle",
    "intersect",
    "is_proper",
    "make_rectangle",
    "point_at",
    "preimage_rectangle",
    "rectangle_from_json",
    "rectangle_to_json",
    "stable_boundary",
    "stable_fiber",
    "unstable_boundary",
    "unstable_fiber",
]

Interval = tuple[QNum, QNum]
ExactPoint = tuple[QNum, QNum]

# float decisions further than this from an edge are trusted without exact arithmetic
FLOAT_MARGIN = 1e-9


class ChartConflict(ValueError):
    """Two rectangles are too large to share a single lift."""


class NotInRectangle(ValueError):
    """Point lies outside the rectangle."""


@dataclass(frozen=True, eq=False)
class Rectangle:
    """Exact product rectangle; ``closed`` flags are ``(u_lo, u_hi, s_lo, s_hi)``."""

    f: ToralAutomorphism = field(repr=False)
    base: ExactPoint
    iu: Interval
    is_: Interval
    closed: tuple[bool, bool, bool, bool] = (True, True, True, True)
    _center: np.ndarray = field(init=False, repr=False, compare=False)
    _extents: tuple[float, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = (self.iu[0] + self.iu[1]) / 2
        ms = (self.is_[0] + self.is_[1]) / 2
        vx, vy = self.f.chart_vector(mu, ms)
        object.__setattr__(self, "_center", np.array([float(self.base[0] + vx), float(self.base[1] + vy)]))
        ext = (float(self.iu[1] - self.iu[0]) * self.f.norm_u, float(self.is_[1] - self.is_[0]) * self.f.norm_s)
        object.__setattr__(self, "_extents", ext)

    # -- geometry --------------------------------------------------------
    @property
    def center(self) -> np.ndarray:
        """Float centre (lifted, not reduced)."""
        return self._center

    @property
    def center_exact(self) -> ExactPoint:
        mu = (self.iu[0] + self.iu[1]) / 2
        ms = (self.is_[0] + self.is_[1]) / 2
        vx, vy = self.f.chart_vector(mu, ms)
        return self.base[0] + vx, self.base[1] + vy

    @property
    def width_u(self) -> QNum:
        return self.iu[1] - self.iu[0]

    @property
    def width_s(self) -> QNum:
        return self.is_[1] - self.is_[0]

    @property
    def area_exact(self) -> QNum:
        return self.width_u * self.width_s * self.f.chart_area

    @property
    def area(self) -> float:
        return float(self.area_exact)

    @property
    def extents(self) -> tuple[float, float]:
        """Unit-length extents along ``e_u`` and ``e_s``."""
        return self._extents

    @property
    def diameter(self) -> float:
        lu, ls = self.extents
        return float(max(np.linalg.norm(lu * self.f.e_u + ls * self.f.e_s), np.linalg.norm(lu * self.f.e_u - ls * self.f.e_s)))

    @property
    def half_box(self) -> np.ndarray:
        """Cartesian half-extents of the axis-aligned bounding box."""
        lu, ls = self.extents
        return 0.5 * (np.abs(lu * self.f.e_u) + np.abs(ls * self.f.e_s))

    @property
    def is_degenerate(self) -> bool:
        return not (self.iu[0] < self.iu[1] and self.is_[0] < self.is_[1])

    def corners(self) -> np.ndarray:
        """Float corners (lifted) in the order (lo,lo), (hi,lo), (hi,hi), (lo,hi)."""
        out = []
        for u, s in ((0, 0), (1, 0), (1, 1), (0, 1)):
            vx, vy = self.f.chart_vector(self.iu[u], self.is_[s])
            out.append((float(self.base[0] + vx), float(self.base[1] + vy)))
        return np.array(out)

    def interior(self) -> Rectangle:
        return replace(self, closed=(False, False, False, False))

    def closure(self) -> Rectangle:
        return replace(self, closed=(True, True, True, True))

    def with_intervals(self, iu: Interval, is_: Interval, closed=None) -> Rectangle:
        return replace(self, iu=iu, is_=is_, closed=self.closed if closed is None else closed)

    def rebased(self, base: ExactPoint) -> Rectangle:
        """Same point set described from another lift/base point (chart shift)."""
        du, ds = self.f.chart_coords(self.base[0] - base[0], self.base[1] - base[1])
        return Rectangle(self.f, base, (self.iu[0] + du, self.iu[1] + du), (self.is_[0] + ds, self.is_[1] + ds), self.closed)

    def __repr__(self):
        fl = "".join("]" if c else ")" for c in self.closed)
        return (
            f"Rectangle(center=({self.center[0] % 1:.4f}, {self.center[1] % 1:.4f}), "
            f"extents=({self.extents[0]:.4g}, {self.extents[1]:.4g}), closed={fl})"
        )


def make_rectangle(
    f: ToralAutomorphism,
    base,
    iu: Sequence,
    is_: Sequence,
    closed: tuple[bool, bool, bool, bool] = (True, True, True, True),
    unit: bool = True,
) -> Rectangle:
    """Build a rectangle from floats or exact numbers.

    With ``unit`` the intervals are read in unit coordinates (along ``e_u``,
    ``e_s``).  ``|w_u|`` is usually irrational even over Q(sqrt(D)), so the
    conversion multiplies by a rational lower bound of ``1/|w_u|`` (relative
    error below 1e-11) and the rectangle never grows past the requested size.
    """
    bx, by = exact_point(f, base)
    bx, by = reduce_exact(bx, by)
    if unit:
        nu2 = f.w_u[0] * f.w_u[0] + f.w_u[1] * f.w_u[1]
        ns2 = f.w_s[0] * f.w_s[0] + f.w_s[1] * f.w_s[1]
        # |w|^2 is in Q(sqrt D); its square root generally is not, so scale by a
        # rational approximation of 1/|w| rounded down (keeps extents conservative)
        ru, rs = _inv_norm(nu2), _inv_norm(ns2)
        iu_q = (f.q(iu[0]) * ru, f.q(iu[1]) * ru)
        is_q = (f.q(is_[0]) * rs, f.q(is_[1]) * rs)
    else:
        iu_q = (f.q(iu[0]), f.q(iu[1]))
        is_q = (f.q(is_[0]), f.q(is_[1]))
    if iu_q[0] > iu_q[1] or is_q[0] > is_q[1]:
        raise ValueError("interval endpoints out of order")
    return Rectangle(f, (bx, by), iu_q, is_q, tuple(bool(c) for c in closed))


def _inv_norm(n2: QNum) -> QNum:
    val = 1.0 / math.sqrt(float(n2))
    fr = Fraction(val).limit_denominator(10**12)
    # round down so that |w| * fr <= 1
    while (n2 * fr * fr) > 1:
        fr -= Fraction(1, 10**12)
    return QNum(fr)


def exact_point(f: ToralAutomorphism, p) -> ExactPoint:
    if isinstance(p, TorusPoint):
        return f.q(p.x), f.q(p.y)
    x, y = p
    return f.q(x), f.q(y)


def point_at(R: Rectangle, u, s) -> ExactPoint:
    """Exact lifted point with chart coordinates ``(u, s)`` in ``R``."""
    vx, vy = R.f.chart_vector(u, s)
    return R.base[0] + vx, R.base[1] + vy


def _lift_near(R: Rectangle, p: ExactPoint) -> ExactPoint:
    cx, cy = R.center
    kx = math.floor(float(p[0]) - cx + 0.5)
    ky = math.floor(float(p[1]) - cy + 0.5)
    return p[0] - kx, p[1] - ky


def chart_offset(R: Rectangle, p) -> tuple[QNum, QNum]:
    """Exact chart coordinates of ``p`` in ``R`` through the lift nearest the centre."""
    p = exact_point(R.f, p)
    lx, ly = _lift_near(R, p)
    return R.f.chart_coords(lx - R.base[0], ly - R.base[1])


def _in_interval(v: QNum, iv: Interval, lo_closed: bool, hi_closed: bool) -> bool:
    lo_ok = v >= iv[0] if lo_closed else v > iv[0]
    hi_ok = v <= iv[1] if hi_closed else v < iv[1]
    return lo_ok and hi_ok


def _float_inside(R: Rectangle, xy: np.ndarray) -> bool | None:
    """Float verdict with a safety margin, or None when too close to call."""
    d = xy - R.center
    d = d - np.floor(d + 0.5)
    u, s = R.f.basis_inverse @ d
    hu, hs = R.extents[0] / 2, R.extents[1] / 2
    mu = abs(u) - hu
    ms = abs(s) - hs
    if mu > FLOAT_MARGIN or ms > FLOAT_MARGIN:
        return False
    if mu < -FLOAT_MARGIN and ms < -FLOAT_MARGIN:
        return True
    return None


def contains(R: Rectangle, x) -> bool:
    """Membership respecting the open/closed side flags (exact near edges)."""
    if isinstance(x, TorusPoint):
        verdict = _float_inside(R, np.array([x.x, x.y]))
        if verdict is not None:
            return verdict
    u, s = chart_offset(R, x)
    c = R.closed
    return _in_interval(u, R.iu, c[0], c[1]) and _in_interval(s, R.is_, c[2], c[3])


def _fiber(R: Rectangle, x, direction: str, epsilon: float | None) -> FiberSegment:
    if not contains(R, x):
        raise NotInRectangle(f"{x} is not in {R}")
    u, s = chart_offset(R, x)
    if direction == "s":
        lo, hi = float(R.is_[0] - s) * R.f.norm_s, float(R.is_[1] - s) * R.f.norm_s
    else:
        lo, hi = float(R.iu[0] - u) * R.f.norm_u, float(R.iu[1] - u) * R.f.norm_u
    if epsilon is not None:
        lo, hi = max(lo, -epsilon), min(hi, epsilon)
    pt = x if isinstance(x, TorusPoint) else TorusPoint(float(x[0]), float(x[1]))
    return FiberSegment(pt, direction, min(lo, 0.0), max(hi, 0.0))


def stable_fiber(R: Rectangle, x, epsilon: float | None = None) -> FiberSegment:
    """``W^s(x, R)`` as a segment through ``x``; optionally cut to ``[-epsilon, epsilon]``."""
    return _fiber(R, x, "s", epsilon)


def unstable_fiber(R: Rectangle, x, epsilon: float | None = None) -> FiberSegment:
    return _fiber(R, x, "u", epsilon)


def is_proper(R: Rectangle) -> bool:
    """Closed with nonempty interior, hence the closure of its interior."""
    return all(R.closed) and not R.is_degenerate


def _meet(a: Interval, af: tuple[bool, bool], b: Interval, bf: tuple[bool, bool]):
    if a[0] > b[0]:
        lo, lo_c = a[0], af[0]
    elif b[0] > a[0]:
        lo, lo_c = b[0], bf[0]
    else:
        lo, lo_c = a[0], af[0] and bf[0]
    if a[1] < b[1]:
        hi, hi_c = a[1], af[1]
    elif b[1] < a[1]:
        hi, hi_c = b[1], bf[1]
    else:
        hi, hi_c = a[1], af[1] and bf[1]
    if lo > hi or (lo == hi and not (lo_c and hi_c)):
        return None
    return (lo, hi), (lo_c, hi_c)


def relative_intervals(R1: Rectangle, R2: Rectangle) -> tuple[Interval, Interval]:
    """``R2``'s intervals expressed in ``R1``'s chart (lift nearest between centres)."""
    d = R2.center - R1.center
    k = np.floor(d + 0.5)
    ox = R2.base[0] - int(k[0]) - R1.base[0]
    oy = R2.base[1] - int(k[1]) - R1.base[1]
    du, ds = R1.f.chart_coords(ox, oy)
    return (R2.iu[0] + du, R2.iu[1] + du), (R2.is_[0] + ds, R2.is_[1] + ds)


def _check_chart(R1: Rectangle, R2: Rectangle):
    if np.any(R1.half_box + R2.half_box >= 0.5):
        raise ChartConflict("rectangles too large to share one lift")


def may_meet(R1: Rectangle, R2: Rectangle) -> bool:
    """Cheap float test; False means the closed rectangles are certainly disjoint."""
    d = R2.center - R1.center
    d = d - np.floor(d + 0.5)
    return bool(np.all(np.abs(d) <= R1.half_box + R2.half_box + FLOAT_MARGIN))


def intersect(R1: Rectangle, R2: Rectangle) -> BoxComplex:
    """``R1 ∩ R2`` as a box complex in ``R1``'s chart (one box or none)."""
    if not may_meet(R1, R2):
        return BoxComplex(())
    _check_chart(R1, R2)
    iu2, is2 = relative_intervals(R1, R2)
    mu = _meet(R1.iu, R1.closed[:2], iu2, R2.closed[:2])
    if mu is None:
        return BoxComplex(())
    ms = _meet(R1.is_, R1.closed[2:], is2, R2.closed[2:])
    if ms is None:
        return BoxComplex(())
    return BoxComplex((Rectangle(R1.f, R1.base, mu[0], ms[0], mu[1] + ms[1]),))


def intersect_box(R1: Rectangle, R2: Rectangle) -> Rectangle | None:
    bc = intersect(R1, R2)
    return bc.boxes[0] if bc.boxes else None


def _scale(iv: Interval, flags: tuple[bool, bool], lam: QNum):
    a, b = iv[0] * lam, iv[1] * lam
    if lam.sign() < 0:
        return (b, a), (flags[1], flags[0])
    return (a, b), flags


def image_rectangle(f: ToralAutomorphism, R: Rectangle) -> Rectangle:
    """``f(R)``: unstable side stretched by ``lambda_u``, stable side by ``lambda_s``."""
    bx, by = reduce_exact(*f.map_exact(*R.base))
    iu, fu = _scale(R.iu, R.closed[:2], f.lam_u)
    is_, fs = _scale(R.is_, R.closed[2:], f.lam_s)
    return Rectangle(f, (bx, by), iu, is_, fu + fs)


def preimage_rectangle(f: ToralAutomorphism, R: Rectangle) -> Rectangle:
    bx, by = reduce_exact(*f.map_inverse_exact(*R.base))
    iu, fu = _scale(R.iu, R.closed[:2], 1 / f.lam_u)
    is_, fs = _scale(R.is_, R.closed[2:], 1 / f.lam_s)
    return Rectangle(f, (bx, by), iu, is_, fu + fs)


@dataclass(frozen=True)
class BoxComplex:
    """A finite union of rectangles."""

    boxes: tuple[Rectangle, ...]
    canonical: bool = False

    def __iter__(self):
        return iter(self.boxes)

    def __len__(self):
        return len(self.boxes)

    @property
    def is_empty(self) -> bool:
        return not self.boxes

    def area_exact(self) -> QNum | int:
        """Total area; exact only when the boxes have disjoint interiors."""
        return sum((b.area_exact for b in self.boxes), 0)

    @property
    def area(self) -> float:
        return float(self.area_exact())

    def contains(self, x) -> bool:
        return any(contains(b, x) for b in self.boxes)

    def union(self, other: BoxComplex) -> BoxComplex:
        return BoxComplex(self.boxes + other.boxes)

    def canonicalize(self) -> BoxComplex:
        """Drop empty boxes, sort, and merge boxes sharing a full edge in one chart."""
        boxes = [b for b in self.boxes if _nonempty(b)]
        merged = True
        while merged:
            merged = False
            for i in range(len(boxes)):
                for j in range(i + 1, len(boxes)):
                    m = _merge(boxes[i], boxes[j])
                    if m is not None:
                        boxes[i] = m
                        del boxes[j]
                        merged = True
                        break
                if merged:
                    break
        boxes.sort(key=lambda b: (round(b.center[0] % 1, 12), round(b.center[1] % 1, 12)))
        return BoxComplex(tuple(boxes), canonical=True)


def _nonempty(b: Rectangle) -> bool:
    c = b.closed
    u_ok = b.iu[0] < b.iu[1] or (b.iu[0] == b.iu[1] and c[0] and c[1])
    s_ok = b.is_[0] < b.is_[1] or (b.is_[0] == b.is_[1] and c[2] and c[3])
    return u_ok and s_ok


def _merge(a: Rectangle, b: Rectangle) -> Rectangle | None:
    try:
        _check_chart(a, b)
    except ChartConflict:
        return None
    if not may_meet(a, b):
        return None
    iu2, is2 = relative_intervals(a, b)
    if iu2 == a.iu and b.closed[:2] == a.closed[:2]:
        if is2[0] == a.is_[1] and (a.closed[3] or b.closed[2]):
            return Rectangle(a.f, a.base, a.iu, (a.is_[0], is2[1]), a.closed[:3] + (b.closed[3],))
        if a.is_[0] == is2[1] and (a.closed[2] or b.closed[3]):
            return Rectangle(a.f, a.base, a.iu, (is2[0], a.is_[1]), a.closed[:2] + (b.closed[2], a.closed[3]))
    if is2 == a.is_ and b.closed[2:] == a.closed[2:]:
        if iu2[0] == a.iu[1] and (a.closed[1] or b.closed[0]):
            return Rectangle(a.f, a.base, (a.iu[0], iu2[1]), a.is_, (a.closed[0], b.closed[1]) + a.closed[2:])
        if a.iu[0] == iu2[1] and (a.closed[0] or b.closed[1]):
            return Rectangle(a.f, a.base, (iu2[0], a.iu[1]), a.is_, (b.closed[0], a.closed[1]) + a.closed[2:])
    return None


def stable_boundary(R: Rectangle) -> BoxComplex:
    """The two faces ``{u = au}`` and ``{u = bu}``, each a full stable fiber."""
    lo = Rectangle(R.f, R.base, (R.iu[0], R.iu[0]), R.is_)
    hi = Rectangle(R.f, R.base, (R.iu[1], R.iu[1]), R.is_)
    return BoxComplex((lo,) if R.iu[0] == R.iu[1] else (lo, hi))


def unstable_boundary(R: Rectangle) -> BoxComplex:
    lo = Rectangle(R.f, R.base, R.iu, (R.is_[0], R.is_[0]))
    hi = Rectangle(R.f, R.base, R.iu, (R.is_[1], R.is_[1]))
    return BoxComplex((lo,) if R.is_[0] == R.is_[1] else (lo, hi))


def in_boundary(R: Rectangle, x) -> bool:
    """``x`` is on the topological boundary of the closed rectangle."""
    u, s = chart_offset(R, x)
    if not (R.iu[0] <= u <= R.iu[1] and R.is_[0] <= s <= R.is_[1]):
        return False
    return u == R.iu[0] or u == R.iu[1] or s == R.is_[0] or s == R.is_[1]


def in_stable_boundary(R: Rectangle, x) -> bool:
    """``x`` lies on a stable face: its unstable fiber ends at ``x``."""
    u, s = chart_offset(R, x)
    return (u == R.iu[0] or u == R.iu[1]) and R.is_[0] <= s <= R.is_[1]


def in_unstable_boundary(R: Rectangle, x) -> bool:
    u, s = chart_offset(R, x)
    return (s == R.is_[0] or s == R.is_[1]) and R.iu[0] <= u <= R.iu[1]


# -- serialization --------------------------------------------------------
def rectangle_to_json(R: Rectangle) -> dict:
    """Floats in unit coordinates for readers, exact pairs for round trips."""
    c = R.corners()
    return {
        "base": [float(R.base[0]), float(R.base[1])],
        "iu": [float(R.iu[0]) * R.f.norm_u, float(R.iu[1]) * R.f.norm_u],
        "is": [float(R.is_[0]) * R.f.norm_s, float(R.is_[1]) * R.f.norm_s],
        "flags": list(R.closed),
        "corners": [[round(float(x), 15), round(float(y), 15)] for x, y in c],
        "exact": {
            "base": [R.base[0].to_json(), R.base[1].to_json()],
            "iu": [R.iu[0].to_json(), R.iu[1].to_json()],
            "is": [R.is_[0].to_json(), R.is_[1].to_json()],
        },
    }


def rectangle_from_json(f: ToralAutomorphism, rec: dict) -> Rectangle:
    d = f.radicand
    if "exact" in rec:
        ex = rec["exact"]
        base = tuple(QNum.from_json(v, d) for v in ex["base"])
        iu = tuple(QNum.from_json(v, d) for v in ex["iu"])
        is_ = tuple(QNum.from_json(v, d) for v in ex["is"])
        return Rectangle(f, base, iu, is_, tuple(bool(x) for x in rec["flags"]))
    return make_rectangle(f, rec["base"], rec["iu"], rec["is"], tuple(rec["flags"]))
