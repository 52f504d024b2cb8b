"""Covers by product rectangles, their refinements, and Markov partitions.

Two partition builders live here.  :func:`arrangement_partition` carries out
the refinement of a cover literally: every point off the cut lines gets the
cell ``R(x)`` cut out by all sets ``T_jk^n`` it belongs to.  For covers by
translated product boxes this always yields a partition into proper
rectangles, but not a Markov one: the stable edges of a translated box are
not mapped into stable edges of the cover.

:func:`build_partition` produces the Markov partition.  It grows a stable
segment ``S`` and an unstable segment ``U`` through the fixed point ``0``
until each segment's endpoints lie on the other one.  Then ``f(S)`` lies in ``S``
and ``f^-1(U)`` lies in ``U``, and the closures of the complementary pieces of
``S ∪ U`` form a Markov partition.  Both segments are grown until every cell is
smaller than the cover's rectangles.  Every cell edge is exact in Q(sqrt(D)),
and :func:`verify_markov` checks the Markov inclusions on exact endpoints.
"""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .local_product import ConstantsBudget
from .quadratic import QNum, qmax, qmin
from .rectangles import (
    FLOAT_MARGIN,
    Rectangle,
    chart_offset,
    contains,
    exact_point,
    image_rectangle,
    intersect,
    intersect_box,
    point_at,
    preimage_rectangle,
    rectangle_from_json,
    rectangle_to_json,
    relative_intervals,
)
from .shadowing import DenseNet, PseudoOrbit, defect, gamma_net, shadow
from .torus import ToralAutomorphism, TorusPoint, apply, apply_inverse, reduce_exact

__all__ = [
    "CellIndex",
    "Cover",
    "CoverCheckReport",
    "CoverageGap",
    "DegenerateCell",
    "MarkovPartition",
    "MarkovReport",
    "PartitionReport",
    "RefinedCellIndex",
    "Skeleton",
    "Violation",
    "admissible_pairs",
    "arrangement_partition",
    "build_cover",
    "build_partition",
    "chart_limit",
    "check_coverage",
    "cover_markov_check",
    "cross_validate_cover",
    "defining_indices",
    "explicit_cover",
    "forward_cylinder",
    "in_z_star",
    "partition_from_json",
    "partition_to_json",
    "perturb_cell",
    "product_cover",
    "refine_cells",
    "refine_pair",
    "region",
    "skeleton_cells",
    "validate_partition",
    "verify_markov",
]


class CoverageGap(ValueError):
    """A probe point of the torus is not covered."""


class DegenerateCell(UserWarning):
    """A zero-area cell was dropped from a partition."""


# -- spatial index ---------------------------------------------------------
class CellIndex:
    """Bucket grid on the torus returning candidate rectangles for a query box."""

    def __init__(self, rects: Sequence[Rectangle], size: int | None = None):
        n = max(1, len(rects))
        self.size = size or max(4, min(256, int(2 * math.sqrt(n))))
        self.buckets: dict[tuple[int, int], list[int]] = defaultdict(list)
        for k, R in enumerate(rects):
            for key in self._keys(R.center, R.half_box):
                self.buckets[key].append(k)

    def _keys(self, c: np.ndarray, h: np.ndarray):
        g = self.size
        lo = np.floor((c - h - FLOAT_MARGIN) * g).astype(int)
        hi = np.floor((c + h + FLOAT_MARGIN) * g).astype(int)
        xs = range(g) if hi[0] - lo[0] + 1 >= g else range(lo[0], hi[0] + 1)
        ys = range(g) if hi[1] - lo[1] + 1 >= g else range(lo[1], hi[1] + 1)
        for i in xs:
            for j in ys:
                yield (i % g, j % g)

    def near_box(self, c: np.ndarray, h: np.ndarray) -> list[int]:
        out = set()
        for key in self._keys(np.asarray(c, dtype=float), np.asarray(h, dtype=float)):
            out.update(self.buckets.get(key, ()))
        return sorted(out)

    def near_point(self, xy) -> list[int]:
        return self.near_box(np.asarray(xy, dtype=float), np.zeros(2))


# -- covers ----------------------------------------------------------------
def _unit_to_chart(f: ToralAutomorphism, h: float, direction: str) -> QNum:
    """Rational lower bound for ``h / |w|`` (chart half-width of unit half-width ``h``)."""
    w = f.w_u if direction == "u" else f.w_s
    n2 = w[0] * w[0] + w[1] * w[1]
    r = Fraction(h / math.sqrt(float(n2))).limit_denominator(10**12)
    while n2 * r * r > h * h:
        r -= Fraction(1, 10**12)
    return f.q(r)


@dataclass(eq=False)
class Cover:
    """A finite cover of the torus by closed product rectangles ``T_1 .. T_m``.

    Rectangles are created on demand, so covers over large nets stay cheap
    until a rectangle is actually used.
    """

    f: ToralAutomorphism
    size: int
    make: Callable[[int], Rectangle] = field(repr=False)
    beta: float
    net: DenseNet | None = None
    half_width: float | None = None
    _cache: dict = field(default_factory=dict, repr=False)
    _explicit: tuple | None = field(default=None, repr=False)
    _neighbors: dict = field(default_factory=dict, repr=False)
    _refined: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return self.size

    def rect(self, j: int) -> Rectangle:
        R = self._cache.get(j)
        if R is None:
            R = self._cache[j] = self.make(j)
        return R

    @property
    def rects(self) -> list[Rectangle]:
        return [self.rect(j) for j in range(self.size)]

    @cached_property
    def _index(self) -> CellIndex:
        return CellIndex(self.rects)

    @property
    def max_diameter(self) -> float:
        if self.net is not None:
            return self.rect(0).diameter
        return max(R.diameter for R in self.rects)

    def candidates(self, c: np.ndarray, h: np.ndarray) -> list[int]:
        """Indices whose rectangles may meet the box ``c +- h`` (float prefilter)."""
        if self.net is None:
            return self._index.near_box(c, h)
        side = self.net.side
        reach = h + self.rect(0).half_box + FLOAT_MARGIN
        lo = np.ceil((c - reach) * side).astype(int)
        hi = np.floor((c + reach) * side).astype(int)
        out = set()
        for i in range(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                out.add((i % side) * side + (j % side))
        return sorted(out)

    def neighbors(self, j: int) -> list[int]:
        out = self._neighbors.get(j)
        if out is None:
            R = self.rect(j)
            out = self._neighbors[j] = [k for k in self.candidates(R.center, R.half_box) if intersect(R, self.rect(k)).boxes]
        return out

    def containing(self, x) -> list[int]:
        p = exact_point(self.f, x)
        xy = np.array([float(p[0]), float(p[1])])
        return [j for j in self.candidates(xy, np.zeros(2)) if contains(self.rect(j), p)]

    def nearest(self, x) -> int:
        """Index of the rectangle whose centre is nearest ``x``."""
        if self.net is not None:
            tp = x if isinstance(x, TorusPoint) else TorusPoint(float(x[0]), float(x[1]))
            return self.net.nearest(tp)
        xy = np.array([float(v) for v in exact_point(self.f, x)])
        cands = self._index.near_point(xy) or range(self.size)

        def dist(k):
            d = self.rect(k).center - xy
            d = d - np.floor(d + 0.5)
            return float(np.hypot(*d))

        return min(cands, key=dist)


def product_cover(f: ToralAutomorphism, net: DenseNet, half_width: float, beta: float | None = None) -> Cover:
    """Translates of one product box of unit half-width ``half_width`` centred on ``net``."""
    hu = _unit_to_chart(f, half_width, "u")
    hs = _unit_to_chart(f, half_width, "s")

    def make(j: int) -> Rectangle:
        p = net.point(j)
        return Rectangle(f, reduce_exact(f.q(p.x), f.q(p.y)), (-hu, hu), (-hs, hs))

    cov = Cover(f, len(net), make, beta if beta is not None else 0.0, net=net, half_width=half_width)
    if beta is None:
        cov.beta = cov.rect(0).diameter / 2
    return cov


def explicit_cover(f: ToralAutomorphism, rects: Sequence[Rectangle]) -> Cover:
    rects = tuple(rects)
    cov = Cover(f, len(rects), lambda j: rects[j], beta=max(R.diameter for R in rects) / 2)
    cov._explicit = rects
    return cov


def _basis_factor(f: ToralAutomorphism) -> float:
    """Diameter of the product box with unit half-widths 1."""
    return float(max(np.linalg.norm(f.e_u + f.e_s), np.linalg.norm(f.e_u - f.e_s)))


def check_coverage(cover: Cover, probe: int = 1000) -> int:
    """Number of uncovered points of a ``probe x probe`` grid."""
    f = cover.f
    g = (np.arange(probe) + 0.5) / probe
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    if cover.net is not None:
        side = cover.net.side
        idx = np.round(pts * side)
        d = pts - idx / side
        uv = d @ f.basis_inverse.T
        R0 = cover.rect(0)
        hu, hs = R0.extents[0] / 2, R0.extents[1] / 2
        ok = (np.abs(uv[:, 0]) < hu - FLOAT_MARGIN) & (np.abs(uv[:, 1]) < hs - FLOAT_MARGIN)
        todo = np.nonzero(~ok)[0]
    else:
        todo = np.arange(len(pts))
    gaps = 0
    for k in todo:
        x = TorusPoint(*pts[k])
        if not cover.containing(x):
            gaps += 1
    return gaps


def build_cover(f: ToralAutomorphism, budget: ConstantsBudget, probe: int = 1000) -> Cover:
    """Cover by closed product boxes of diameter ``2*beta`` centred on a gamma-net."""
    net = gamma_net(budget.gamma)
    h = budget.beta / _basis_factor(f)
    cov = product_cover(f, net, h, beta=budget.beta)
    gaps = check_coverage(cov, probe)
    if gaps:
        raise CoverageGap(f"{gaps} of {probe * probe} probe points uncovered")
    return cov


@dataclass(frozen=True)
class CoverCheckReport:
    samples: int
    checked: int
    stable_violations: int
    unstable_violations: int

    @property
    def violations(self) -> int:
        return self.stable_violations + self.unstable_violations


def _fiber_inclusions(f: ToralAutomorphism, Ri: Rectangle, Rj: Rectangle, xi, xj) -> tuple[bool, bool]:
    """Exact Markov inclusions at a point with chart coordinates ``xi`` in Ri and ``xj`` in Rj = f-image side."""
    u0, s0 = xi
    u1, s1 = xj
    img = sorted((s1 + f.lam_s * (Ri.is_[0] - s0), s1 + f.lam_s * (Ri.is_[1] - s0)))
    stable_ok = Rj.is_[0] <= img[0] and img[1] <= Rj.is_[1]
    pre = sorted((u0 + (Rj.iu[0] - u1) / f.lam_u, u0 + (Rj.iu[1] - u1) / f.lam_u))
    unstable_ok = Ri.iu[0] <= pre[0] and pre[1] <= Ri.iu[1]
    return stable_ok, unstable_ok


def cover_markov_check(
    f: ToralAutomorphism,
    cover: Cover,
    samples: int = 1000,
    rng: np.random.Generator | None = None,
    points: Iterable | None = None,
) -> CoverCheckReport:
    """Sampled check of ``f W^s(x,T_s) ⊂ W^s(fx,T_t)`` and ``f W^u(x,T_s) ⊃ W^u(fx,T_t)``.

    ``s`` is the rectangle nearest ``x`` and ``t`` the one nearest ``f(x)``.
    Points outside ``T_s`` or with ``f(x)`` outside ``T_t`` are skipped.
    """
    if points is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        points = [TorusPoint(*rng.random(2)) for _ in range(samples)]
    points = list(points)
    checked = bad_s = bad_u = 0
    for x in points:
        p = exact_point(f, x)
        fp = reduce_exact(*f.map_exact(*p))
        Ts = cover.rect(cover.nearest(x))
        Tt = cover.rect(cover.nearest(fp))
        if not (contains(Ts, p) and contains(Tt, fp)):
            continue
        checked += 1
        ok_s, ok_u = _fiber_inclusions(f, Ts, Tt, chart_offset(Ts, p), chart_offset(Tt, fp))
        bad_s += not ok_s
        bad_u += not ok_u
    return CoverCheckReport(len(points), checked, bad_s, bad_u)


def cross_validate_cover(
    f: ToralAutomorphism,
    cover: Cover,
    budget: ConstantsBudget,
    samples: int = 100,
    rng: np.random.Generator | None = None,
    window: int = 20,
) -> int:
    """Shadow random net pseudo-orbits starting at ``p_s``; count shadows outside ``T_s``.

    Each step jumps to one of the four net points around the true image, so
    defects stay below ``2*sqrt(2)*spacing*||A||``, within ``alpha``.
    """
    net = cover.net
    if net is None:
        raise ValueError("cross-validation needs a net-based cover")
    rng = rng if rng is not None else np.random.default_rng(0)
    side = net.side

    def jump(p: TorusPoint) -> TorusPoint:
        i = math.floor(p.x * side) + int(rng.integers(0, 2))
        j = math.floor(p.y * side) + int(rng.integers(0, 2))
        return TorusPoint((i % side) / side, (j % side) / side)

    failures = 0
    for _ in range(samples):
        s = int(rng.integers(0, len(net)))
        p0 = net.point(s)
        fwd, back = [p0], [p0]
        for _ in range(window):
            fwd.append(jump(apply(f, fwd[-1])))
            back.append(jump(apply_inverse(f, back[-1])))
        pts = back[:0:-1] + fwd
        _, delta = defect(f, pts)
        res = shadow(f, PseudoOrbit(window, tuple(pts), delta))
        if not contains(cover.rect(s), res.point_exact):
            failures += 1
    return failures


# -- refinement of a cover ---------------------------------------------------
@dataclass(frozen=True, order=True)
class RefinedCellIndex:
    """``(j, k, n)``: ``n`` says whether the unstable and stable fibers in ``T_j`` meet ``T_k``."""

    j: int
    k: int
    n: int

    def __post_init__(self):
        if self.n not in (1, 2, 3, 4):
            raise ValueError("n must be 1..4")


Piece = tuple[tuple[QNum, QNum], tuple[bool, bool]]


def _meet_closed(a, b) -> Piece | None:
    lo, hi = qmax(a[0], b[0]), qmin(a[1], b[1])
    if lo > hi:
        return None
    return (lo, hi), (True, True)


def _minus_closed(a, b) -> list[Piece]:
    """``a \\ b`` for closed intervals, as half-open pieces."""
    out = []
    if a[0] < b[0]:
        out.append(((a[0], qmin(a[1], b[0])), (True, not a[1] >= b[0])))
    if b[1] < a[1]:
        out.append(((qmax(a[0], b[1]), a[1]), (not a[0] <= b[1], True)))
    return out


def refine_pair(cover: Cover, j: int, k: int) -> dict[int, list[Rectangle]]:
    """The four sets ``T_jk^1 .. T_jk^4`` as lists of boxes in ``T_j``'s chart.

    The unstable fiber of ``x`` in ``T_j`` meets ``T_k`` iff the stable
    coordinate of ``x`` lies in ``T_k``'s stable range (and the unstable ranges
    overlap); symmetrically for the stable fiber.
    """
    key = (j, k)
    if key not in cover._refined:
        cover._refined[key] = _refine_pair(cover, j, k)
    return cover._refined[key]


def _refine_pair(cover: Cover, j: int, k: int) -> dict[int, list[Rectangle]]:
    Tj, Tk = cover.rect(j), cover.rect(k)
    if intersect(Tj, Tk).is_empty:
        return {1: [], 2: [], 3: [], 4: [Tj]}
    iu_k, is_k = relative_intervals(Tj, Tk)
    u_in, s_in = _meet_closed(Tj.iu, iu_k), _meet_closed(Tj.is_, is_k)
    u_out, s_out = _minus_closed(Tj.iu, iu_k), _minus_closed(Tj.is_, is_k)

    def boxes(us: list[Piece], ss: list[Piece]) -> list[Rectangle]:
        return [Rectangle(cover.f, Tj.base, u[0], s[0], u[1] + s[1]) for u in us for s in ss]

    return {
        1: boxes([u_in], [s_in]),
        2: boxes(u_out, [s_in]),
        3: boxes([u_in], s_out),
        4: boxes(u_out, s_out),
    }


def refine_cells(cover: Cover, indices: Iterable[int] | None = None) -> list[tuple[RefinedCellIndex, list[Rectangle]]]:
    """Nonempty ``T_jk^n`` for all meeting pairs; other pairs only give ``T_jk^4 = T_j``."""
    out = []
    for j in indices if indices is not None else range(len(cover)):
        for k in cover.neighbors(j):
            for n, bx in refine_pair(cover, j, k).items():
                if bx:
                    out.append((RefinedCellIndex(j, k, n), bx))
    return out


def defining_indices(cover: Cover, x) -> frozenset[RefinedCellIndex]:
    """``H(x)`` restricted to meeting pairs ``(j, k)``."""
    p = exact_point(cover.f, x)
    out = set()
    for j in cover.containing(p):
        for k in cover.neighbors(j):
            for n, bx in refine_pair(cover, j, k).items():
                if any(contains(b, p) for b in bx):
                    out.add(RefinedCellIndex(j, k, n))
    return frozenset(out)


def _open_piece_around(R: Rectangle, p) -> Rectangle | None:
    """The closed box of ``R`` whose interior holds ``p``, if any."""
    u, s = chart_offset(R, p)
    if R.iu[0] < u < R.iu[1] and R.is_[0] < s < R.is_[1]:
        return R.closure()
    return None


def _closure_pieces(bx: list[Rectangle]) -> list[Rectangle]:
    return [b.closure() for b in bx]


def _cell_box(cover: Cover, p, h: Iterable[RefinedCellIndex]) -> Rectangle | None:
    cell = None
    for idx in sorted(h):
        pieces = _closure_pieces(refine_pair(cover, idx.j, idx.k)[idx.n])
        around = [b for b in (_open_piece_around(b, p) for b in pieces) if b is not None]
        if not around:
            return None
        box = around[0]
        if cell is None:
            cell = box
        else:
            cell = intersect_box(cell, box)
            if cell is None:
                return None
    return cell


def in_z_star(cover: Cover, x) -> bool:
    """``x`` lies in the interior of the closure of every ``T_jk^n`` containing it."""
    p = exact_point(cover.f, x)
    h = defining_indices(cover, p)
    return bool(h) and _cell_box(cover, p, h) is not None


def region(cover: Cover, x) -> Rectangle:
    """Closure of ``R(x)`` for ``x`` in ``Z*``."""
    p = exact_point(cover.f, x)
    h = defining_indices(cover, p)
    box = _cell_box(cover, p, h) if h else None
    if box is None:
        raise ValueError(f"{x} is not in Z*")
    return box


# -- partitions --------------------------------------------------------------
@dataclass(frozen=True)
class Skeleton:
    """Stable half-length ``a`` and unstable half-length ``c`` in chart units."""

    a: QNum
    c: QNum


@dataclass(eq=False)
class MarkovPartition:
    f: ToralAutomorphism
    cells: tuple[Rectangle, ...]
    provenance: tuple[tuple[int, ...], ...] = ()
    method: str = "skeleton"
    skeleton: Skeleton | None = None
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.cells)

    @cached_property
    def diameter(self) -> float:
        return max(R.diameter for R in self.cells)

    @cached_property
    def index(self) -> CellIndex:
        return CellIndex(self.cells)

    def locate(self, x) -> list[int]:
        """Indices of the closed cells containing ``x``."""
        p = exact_point(self.f, x)
        xy = np.array([float(p[0]), float(p[1])])
        return [k for k in self.index.near_point(xy) if contains(self.cells[k], x if isinstance(x, TorusPoint) else p)]


def _lattice_in(f: ToralAutomorphism, ulo, uhi, slo, shi) -> list[tuple[QNum, QNum]]:
    """Chart coordinates of integer points inside a closed chart box."""
    corners = np.array([[float(v) for v in f.chart_vector(u, s)] for u in (ulo, uhi) for s in (slo, shi)])
    lo = np.floor(corners.min(axis=0)).astype(int)
    hi = np.ceil(corners.max(axis=0)).astype(int)
    W = np.array([[float(f.w_u[0]), float(f.w_s[0])], [float(f.w_u[1]), float(f.w_s[1])]])
    Winv = np.linalg.inv(W)
    gx, gy = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    us = pts @ Winv.T
    fl = [float(ulo), float(uhi), float(slo), float(shi)]
    tol = 1e-7 * (1 + np.abs(us).max(initial=0))
    keep = (us[:, 0] >= fl[0] - tol) & (us[:, 0] <= fl[1] + tol) & (us[:, 1] >= fl[2] - tol) & (us[:, 1] <= fl[3] + tol)
    out = []
    for n1, n2 in pts[keep]:
        u, s = f.chart_coords(f.q(int(n1)), f.q(int(n2)))
        if ulo <= u <= uhi and slo <= s <= shi:
            out.append((u, s))
    return out


def _next_s(f: ToralAutomorphism, c: QNum, target: QNum) -> QNum:
    """Smallest ``a >= target`` with ``a*w_s`` on ``U = [-c, c]*w_u``."""
    hi = target * 2
    while True:
        cand = [s for u, s in _lattice_in(f, -c, c, target, hi)]
        if cand:
            return min(cand)
        hi = hi * 2


def _next_u(f: ToralAutomorphism, a: QNum, target: QNum) -> QNum:
    """Smallest ``c >= target`` with ``c*w_u`` on ``S = [-a, a]*w_s``."""
    hi = target * 2
    while True:
        cand = [u for u, s in _lattice_in(f, target, hi, -a, a)]
        if cand:
            return min(cand)
        hi = hi * 2


def _initial_skeleton(f: ToralAutomorphism) -> Skeleton:
    c0 = _unit_to_chart(f, 1.0, "u")
    tiny = _unit_to_chart(f, 1e-9, "s")
    a = _next_s(f, c0, tiny)
    c = _next_u(f, a, c0)
    return Skeleton(a, c)


def skeleton_cells(f: ToralAutomorphism, sk: Skeleton) -> list[Rectangle]:
    """Closures of the pieces of the torus cut along ``S`` and ``U``.

    Each piece sits on top of a gap of ``S`` between consecutive crossings
    with ``U``; its height is the first return of the unstable direction to
    ``S``, and its top edge is again a gap of ``S``.
    """
    a, c = sk.a, sk.c
    # a lattice point u*w_u + s*w_s puts the U-point u on the S-point -s;
    # U's upper endpoint starts no edge going up
    cuts = {-s for u, s in _lattice_in(f, -c, c, -a, a) if u < c}
    cuts |= {a, -a}
    bps = sorted(v for v in cuts if -a <= v <= a)
    reach = c * 2
    while True:
        shoot = sorted((p for p in _lattice_in(f, f.q(0), reach, -2 * a, 2 * a) if p[0] > 0), key=lambda p: float(p[0]))
        out = []
        ok = True
        for s0, s1 in zip(bps, bps[1:]):
            sm = (s0 + s1) / 2
            hit = next((p for p in shoot if -a <= sm - p[1] <= a), None)
            if hit is None:
                ok = False
                break
            u, s = hit
            if not (-a <= s0 - s and s1 - s <= a):
                raise RuntimeError("skeleton is not closed: a top edge leaves the stable segment")
            vx, vy = f.chart_vector(f.q(0), s0)
            out.append(Rectangle(f, reduce_exact(vx, vy), (f.q(0), u), (f.q(0), s1 - s0)))
        if ok:
            return out
        reach = reach * 2


def chart_limit(f: ToralAutomorphism) -> float:
    """Cell diameter below which ``f`` and ``f^-1`` images stay within one lift of a cell.

    A box of diameter ``d`` has bounding half-extents at most ``d/sqrt(2)``
    and its image at most ``|lambda_u| d/sqrt(2)``; together they must stay
    below 1/2.
    """
    return 0.99 / (math.sqrt(2.0) * (abs(f.lambda_u) + 1.0))


def build_partition(
    f: ToralAutomorphism,
    cover: Cover | None = None,
    target: float | None = None,
    growth: float = 1.1,
    max_steps: int = 2000,
) -> MarkovPartition:
    """Markov partition whose cells are all smaller than ``target``.

    ``target`` defaults to the cover's rectangle diameter, so the partition
    is at least as fine as the cover.  The segment whose direction dominates
    the largest cell is grown to its next crossing beyond ``growth`` times
    its current length, until every cell is small enough.

    Cells are also kept below :func:`chart_limit`, so that images and
    preimages of cells meet their neighbours through a single lift.
    """
    if target is None:
        if cover is None:
            raise ValueError("need a cover or a target diameter")
        target = cover.max_diameter
    if not 0 < target < 0.5:
        raise ValueError(f"target diameter must lie in (0, 1/2), got {target}")
    target = min(target, chart_limit(f))
    sk = _initial_skeleton(f)
    g = f.q(Fraction(growth).limit_denominator(1000))
    for _ in range(max_steps):
        cells = skeleton_cells(f, sk)
        worst = max(cells, key=lambda R: R.diameter)
        if worst.diameter < target:
            break
        lu, ls = worst.extents
        if lu > ls:
            sk = Skeleton(_next_s(f, sk.c, sk.a * g), sk.c)
        else:
            sk = Skeleton(sk.a, _next_u(f, sk.a, sk.c * g))
    else:
        raise RuntimeError(f"no partition finer than {target} after {max_steps} steps")
    cells.sort(key=lambda R: (round(float(R.base[0]), 12), round(float(R.base[1]), 12)))
    prov: tuple[tuple[int, ...], ...] = ()
    if cover is not None:
        prov = tuple((cover.nearest(TorusPoint(*R.center)),) for R in cells)
    return MarkovPartition(f, tuple(cells), prov, "skeleton", sk)


def _box_minus(box: Rectangle, cut: Rectangle) -> list[Rectangle]:
    """Closed pieces of ``box`` outside ``cut`` (both in the same chart), positive area only."""
    iu_c, is_c = relative_intervals(box, cut)
    pieces = []
    u0, u1 = box.iu
    s0, s1 = box.is_
    cu0, cu1 = qmax(u0, iu_c[0]), qmin(u1, iu_c[1])
    cs0, cs1 = qmax(s0, is_c[0]), qmin(s1, is_c[1])
    if cu0 >= cu1 or cs0 >= cs1:
        return [box]
    for iu in ((u0, cu0), (cu1, u1)):
        if iu[0] < iu[1]:
            pieces.append(box.with_intervals(iu, box.is_))
    for is_ in ((s0, cs0), (cs1, s1)):
        if is_[0] < is_[1]:
            pieces.append(box.with_intervals((cu0, cu1), is_))
    return pieces


def arrangement_partition(f: ToralAutomorphism, cover: Cover) -> MarkovPartition:
    """All closures ``R(x)`` for ``x`` in ``Z*``, found by exhausting each ``T_j``.

    Each ``T_j`` is consumed piece by piece: pick an interior point of what
    is left, add the closure of its ``R(x)``, and cut that out.  Meant for
    small covers (the work grows with the square of the number of cut lines).
    """
    found: dict[tuple, Rectangle] = {}
    prov: dict[tuple, tuple[int, ...]] = {}
    dropped = 0
    fractions_ = [Fraction(1, 2), Fraction(1, 3), Fraction(2, 7), Fraction(5, 11), Fraction(3, 13)]
    for j in range(len(cover)):
        todo = [cover.rect(j).closure()]
        while todo:
            box = todo.pop()
            cell = None
            for fu in fractions_:
                for fs in fractions_:
                    p = point_at(box, box.iu[0] + box.width_u * fu, box.is_[0] + box.width_s * fs)
                    h = defining_indices(cover, p)
                    cell = _cell_box(cover, p, h) if h else None
                    if cell is not None:
                        break
                if cell is not None:
                    break
            if cell is None:
                raise RuntimeError("no point of Z* found in a remaining piece")
            if cell.is_degenerate:
                warnings.warn(f"dropping zero-area cell {cell}", DegenerateCell, stacklevel=2)
                dropped += 1
                continue
            key = _cell_key(cell)
            if key not in found:
                found[key] = cell
                prov[key] = tuple(sorted({i.j for i in h}))
            todo.extend(_box_minus(box, cell))
    keys = sorted(found)
    cells = tuple(found[k] for k in keys)
    return MarkovPartition(f, cells, tuple(prov[k] for k in keys), "arrangement", dropped=dropped)


def _cell_key(R: Rectangle) -> tuple:
    """Chart-independent identity of a closed cell: reduced exact lower corner and widths."""
    x, y = reduce_exact(*point_at(R, R.iu[0], R.is_[0]))
    return (float(x), float(y), x.a, x.b, y.a, y.b, R.width_u.a, R.width_u.b, R.width_s.a, R.width_s.b)


# -- validation --------------------------------------------------------------
@dataclass(frozen=True)
class PartitionReport:
    cells: int
    area_sum: QNum
    overlaps: int
    improper: int
    diameter: float
    uncovered: int

    @property
    def area_error(self) -> float:
        return abs(float(self.area_sum) - 1.0)

    @property
    def ok(self) -> bool:
        return self.area_error <= 1e-9 and self.overlaps == 0 and self.improper == 0 and self.uncovered == 0


def validate_partition(partition: MarkovPartition, probe: int = 200) -> PartitionReport:
    """Exact area sum, pairwise interior overlaps, properness and probe-grid coverage."""
    cells = partition.cells
    area = sum((R.area_exact for R in cells), partition.f.q(0))
    overlaps = 0
    for i, R in enumerate(cells):
        for j in partition.index.near_box(R.center, R.half_box):
            if j > i and intersect(R.interior(), cells[j].interior()).boxes:
                overlaps += 1
    improper = sum(1 for R in cells if not (all(R.closed) and not R.is_degenerate))
    g = (np.arange(probe) + 0.5) / probe
    uncovered = sum(1 for x in g for y in g if not partition.locate(TorusPoint(x, y)))
    return PartitionReport(len(cells), area, overlaps, improper, partition.diameter, uncovered)


def admissible_pairs(partition: MarkovPartition) -> list[tuple[int, int]]:
    """``(i, j)`` with ``f(int R_i) ∩ int R_j`` nonempty."""
    f = partition.f
    out = []
    for i, R in enumerate(partition.cells):
        F = image_rectangle(f, R).interior()
        for j in partition.index.near_box(F.center, F.half_box):
            if intersect(F, partition.cells[j].interior()).boxes:
                out.append((i, j))
    return out


def forward_cylinder(partition: MarkovPartition, word: Sequence[int]) -> Rectangle | None:
    """``R_{w0} ∩ f^-1 R_{w1} ∩ ... ∩ f^-n R_{wn}`` in ``R_{w0}``'s chart."""
    f = partition.f
    C = partition.cells[word[-1]]
    for k in reversed(word[:-1]):
        C = intersect_box(partition.cells[k], preimage_rectangle(f, C))
        if C is None:
            return None
    return C


def backward_cylinder(partition: MarkovPartition, word: Sequence[int]) -> Rectangle | None:
    """``R_{w0} ∩ f R_{w-1} ∩ ... ∩ f^n R_{w-n}`` for ``word = (w-n, ..., w0)``."""
    f = partition.f
    C = partition.cells[word[0]]
    for k in word[1:]:
        C = intersect_box(partition.cells[k], image_rectangle(f, C))
        if C is None:
            return None
    return C


@dataclass(frozen=True)
class Violation:
    i: int
    j: int
    point: tuple[float, float]
    side: str


@dataclass
class MarkovReport:
    pairs: int = 0
    samples: int = 0
    boundary_faces: int = 0
    cylinder_words: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def count(self, side: str) -> int:
        return sum(1 for v in self.violations if v.side == side)

    def summary(self) -> list[str]:
        sides = ("membership", "stable", "unstable", "boundary-s", "boundary-u", "cylinder")
        return [
            f"admissible pairs: {self.pairs}",
            f"fiber samples: {self.samples}",
            f"boundary faces: {self.boundary_faces}",
            f"forward cylinders: {self.cylinder_words}",
        ] + [f"violations[{s}]: {self.count(s)}" for s in sides]


def _pair_shift(f: ToralAutomorphism, Ri: Rectangle, Rj: Rectangle) -> tuple[QNum, QNum]:
    """``(du, ds)`` with ``Rj``-chart = ``(lam_u*u + du, lam_s*s + ds)`` for ``Ri``-chart ``(u, s)``."""
    F = image_rectangle(f, Ri)
    iu, is_ = relative_intervals(Rj, F)
    return iu[0] - F.iu[0], is_[0] - F.is_[0]


def _pull(iv, shift, lam):
    a, b = (iv[0] - shift) / lam, (iv[1] - shift) / lam
    return (a, b) if a <= b else (b, a)


def _rational_unit(rng: np.random.Generator) -> Fraction:
    return Fraction(int(rng.integers(1, 2**20)), 2**20)


def _check_pair(f, partition, i, j, samples, rng, report: MarkovReport):
    Ri, Rj = partition.cells[i], partition.cells[j]
    du, ds = _pair_shift(f, Ri, Rj)
    pu = _pull(Rj.iu, du, f.lam_u)
    ps = _pull(Rj.is_, ds, f.lam_s)
    ulo, uhi = qmax(Ri.iu[0], pu[0]), qmin(Ri.iu[1], pu[1])
    slo, shi = qmax(Ri.is_[0], ps[0]), qmin(Ri.is_[1], ps[1])
    if not (ulo < uhi and slo < shi):
        report.violations.append(Violation(i, j, tuple(Ri.center % 1), "membership"))
        return
    pts = [(ulo + (uhi - ulo) * _rational_unit(rng), slo + (shi - slo) * _rational_unit(rng)) for _ in range(samples)]
    # points of R_i ∩ f^-1 R_j on its boundary
    pts += [(ulo, slo), (ulo, shi), (uhi, slo), (uhi, shi)]
    for u0, s0 in pts:
        report.samples += 1
        x = point_at(Ri, u0, s0)
        fx = f.map_exact(*x)
        u1, s1 = chart_offset(Rj, fx)
        where = (float(x[0]) % 1.0, float(x[1]) % 1.0)
        if not (Rj.iu[0] <= u1 <= Rj.iu[1] and Rj.is_[0] <= s1 <= Rj.is_[1]):
            report.violations.append(Violation(i, j, where, "membership"))
            continue
        ok_s, ok_u = _fiber_inclusions(f, Ri, Rj, (u0, s0), (u1, s1))
        if not ok_s:
            report.violations.append(Violation(i, j, where, "stable"))
        if not ok_u:
            report.violations.append(Violation(i, j, where, "unstable"))


def _faces(partition: MarkovPartition, kind: str) -> list[tuple[int, Rectangle]]:
    out = []
    for k, R in enumerate(partition.cells):
        if kind == "s":
            out += [(k, R.with_intervals((v, v), R.is_)) for v in R.iu]
        else:
            out += [(k, R.with_intervals(R.iu, (v, v))) for v in R.is_]
    return out


def _face_covered(partition: MarkovPartition, face: Rectangle, kind: str) -> bool:
    """``face`` (degenerate box) is covered by faces of the same kind of partition cells."""
    own = face.is_ if kind == "s" else face.iu
    pieces = []
    for k in partition.index.near_box(face.center, face.half_box):
        Rk = partition.cells[k]
        iu, is_ = relative_intervals(Rk, face)
        if kind == "s":
            pos, span, lines, rng_k, shift = iu[0], is_, Rk.iu, Rk.is_, is_[0] - face.is_[0]
        else:
            pos, span, lines, rng_k, shift = is_[0], iu, Rk.is_, Rk.iu, iu[0] - face.iu[0]
        if pos != lines[0] and pos != lines[1]:
            continue
        lo, hi = qmax(span[0], rng_k[0]), qmin(span[1], rng_k[1])
        if lo <= hi:
            pieces.append((lo - shift, hi - shift))
    pieces.sort(key=lambda p: float(p[0]))
    reach = own[0]
    for lo, hi in pieces:
        if lo > reach:
            return False
        reach = qmax(reach, hi)
        if reach >= own[1]:
            return True
    return reach >= own[1]


def check_boundary_invariance(partition: MarkovPartition) -> tuple[int, list[Violation]]:
    """``f(∂^s) ⊂ ∂^s`` and ``f^-1(∂^u) ⊂ ∂^u``, face by face and endpoint-exact."""
    f = partition.f
    bad = []
    n = 0
    for kind, move in (("s", image_rectangle), ("u", preimage_rectangle)):
        for k, face in _faces(partition, kind):
            n += 1
            img = move(f, face)
            if not _face_covered(partition, img, kind):
                bad.append(Violation(k, -1, tuple(img.center % 1), f"boundary-{kind}"))
    return n, bad


def _random_walk(pairs_by_row: dict[int, list[int]], start: int, length: int, rng) -> list[int]:
    w = [start]
    for _ in range(length):
        nxt = pairs_by_row[w[-1]]
        w.append(nxt[int(rng.integers(0, len(nxt)))])
    return w


def verify_markov(
    f: ToralAutomorphism,
    partition: MarkovPartition,
    samples: int = 100,
    rng: np.random.Generator | None = None,
    words: int = 20,
    depth: int = 8,
    pairs: Sequence[tuple[int, int]] | None = None,
) -> MarkovReport:
    """Exact Markov verification.

    For every admissible pair, ``samples`` random rational points of
    ``int R_i ∩ f^-1 int R_j`` plus its four corners get both fiber
    inclusions checked.  Stable faces must map into stable faces and
    unstable faces must be covered by images of unstable faces.  Random
    forward cylinders must keep the full stable extent of their first cell.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    report = MarkovReport()
    pairs = list(pairs) if pairs is not None else admissible_pairs(partition)
    report.pairs = len(pairs)
    for i, j in pairs:
        _check_pair(f, partition, i, j, samples, rng, report)
    n, bad = check_boundary_invariance(partition)
    report.boundary_faces = n
    report.violations.extend(bad)
    rows: dict[int, list[int]] = defaultdict(list)
    for i, j in pairs:
        rows[i].append(j)
    starts = sorted(rows)
    for _ in range(words if starts else 0):
        w = _random_walk(rows, starts[int(rng.integers(0, len(starts)))], depth, rng)
        report.cylinder_words += 1
        C = forward_cylinder(partition, w)
        R0 = partition.cells[w[0]]
        if C is None or C.is_ != R0.is_ or C.is_degenerate:
            report.violations.append(Violation(w[0], w[1], tuple(R0.center % 1), "cylinder"))
    return report


def perturb_cell(partition: MarkovPartition, k: int, fraction: float = 0.1) -> MarkovPartition:
    """Copy of ``partition`` with cell ``k``'s upper stable edge pulled in (a negative control)."""
    R = partition.cells[k]
    t = partition.f.q(Fraction(fraction).limit_denominator(1000))
    moved = R.with_intervals(R.iu, (R.is_[0], R.is_[1] - R.width_s * t))
    cells = partition.cells[:k] + (moved,) + partition.cells[k + 1:]
    return MarkovPartition(partition.f, cells, partition.provenance, partition.method + "+perturbed", partition.skeleton)


# -- serialization -------------------------------------------------------------
def partition_to_json(partition: MarkovPartition) -> dict:
    out = {
        "method": partition.method,
        "radicand": partition.f.radicand,
        "cells": [rectangle_to_json(R) for R in partition.cells],
        "provenance": [list(p) for p in partition.provenance],
        "diameter": partition.diameter,
    }
    if partition.skeleton is not None:
        out["skeleton"] = {"a": partition.skeleton.a.to_json(), "c": partition.skeleton.c.to_json()}
    return out


def partition_from_json(f: ToralAutomorphism, data: dict) -> MarkovPartition:
    cells = tuple(rectangle_from_json(f, rec) for rec in data["cells"])
    sk = None
    if "skeleton" in data:
        sk = Skeleton(QNum.from_json(data["skeleton"]["a"], f.radicand), QNum.from_json(data["skeleton"]["c"], f.radicand))
    prov = tuple(tuple(p) for p in data.get("provenance", []))
    return MarkovPartition(f, cells, prov, data.get("method", "skeleton"), sk)
