"""Symbolic dynamics of a Markov partition.

Words are finite centred windows ``a_{-N} .. a_N`` of cell indices.  The
cylinder ``K_N(a)`` is the intersection of ``f^-j R_{a_j}`` over the window; it
is a single exact rectangle, and ``pi`` of a word is reported as the centre of
that rectangle together with half its diameter.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .partition import MarkovPartition, admissible_pairs, backward_cylinder, forward_cylinder
from .rectangles import FLOAT_MARGIN, Rectangle, _float_inside, chart_offset, exact_point, intersect_box
from .torus import ToralAutomorphism, TorusPoint, apply, reduce_exact, torus_distance

__all__ = [
    "BoundaryHit",
    "CylinderIntersection",
    "EmptyCylinder",
    "IndexOutOfRange",
    "InjectivityReport",
    "ItineraryWindow",
    "Reducible",
    "TransitionMatrix",
    "all_codes",
    "cylinder",
    "encode",
    "injectivity_check",
    "is_admissible",
    "is_irreducible",
    "perron_eigenvalue",
    "pi_point",
    "random_word",
    "semiconjugacy_residual",
    "shift",
    "transition_matrix",
]


class IndexOutOfRange(IndexError):
    """A word uses a symbol outside ``0 .. m-1``."""


class EmptyCylinder(RuntimeError):
    """An admissible word with an empty cylinder: the partition is not Markov."""


class Reducible(UserWarning):
    """The transition matrix is not irreducible."""


@dataclass(frozen=True)
class TransitionMatrix:
    """0/1 matrix with ``A[i, j] = 1`` iff ``f(int R_i)`` meets ``int R_j``."""

    entries: np.ndarray

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, ij) -> int:
        return int(self.entries[ij])

    def successors(self, i: int) -> np.ndarray:
        return np.nonzero(self.entries[i])[0]

    def to_csv(self) -> str:
        return "".join(",".join(str(int(v)) for v in row) + "\n" for row in self.entries)

    @classmethod
    def from_csv(cls, text: str) -> TransitionMatrix:
        rows = [[int(v) for v in line.split(",")] for line in text.strip().splitlines() if line.strip()]
        return cls(np.array(rows, dtype=np.uint8))


def transition_matrix(f: ToralAutomorphism, partition: MarkovPartition) -> TransitionMatrix:
    m = len(partition)
    A = np.zeros((m, m), dtype=np.uint8)
    for i, j in admissible_pairs(partition):
        A[i, j] = 1
    return TransitionMatrix(A)


@dataclass(frozen=True)
class ItineraryWindow:
    """Symbols ``a_{-N} .. a_N``."""

    N: int
    word: tuple[int, ...]

    def __post_init__(self):
        if len(self.word) != 2 * self.N + 1:
            raise ValueError(f"a window of half-width {self.N} has {2 * self.N + 1} symbols, got {len(self.word)}")

    def __getitem__(self, j: int) -> int:
        if abs(j) > self.N:
            raise IndexError(j)
        return self.word[j + self.N]

    @classmethod
    def of(cls, word: Sequence[int]) -> ItineraryWindow:
        if len(word) % 2 == 0:
            raise ValueError("a centred window needs an odd number of symbols")
        return cls(len(word) // 2, tuple(int(a) for a in word))

    def __str__(self) -> str:
        return ",".join(str(a) for a in self.word)


def _symbols(word) -> tuple[int, ...]:
    return word.word if isinstance(word, ItineraryWindow) else tuple(int(a) for a in word)


def is_admissible(A: TransitionMatrix, word) -> bool:
    w = _symbols(word)
    for a in w:
        if not 0 <= a < A.m:
            raise IndexOutOfRange(f"symbol {a} outside 0..{A.m - 1}")
    return all(A.entries[a, b] for a, b in zip(w, w[1:]))


def shift(word: ItineraryWindow) -> ItineraryWindow:
    """``sigma`` on a finite window: recentre at ``a_1`` and drop one symbol per side."""
    if word.N < 1:
        raise ValueError("cannot shift a window of half-width 0")
    return ItineraryWindow(word.N - 1, word.word[2:])


def random_word(A: TransitionMatrix, N: int, rng: np.random.Generator) -> ItineraryWindow:
    """Random walk on the transition graph (uniform start, uniform successor)."""
    w = [int(rng.integers(0, A.m))]
    for _ in range(2 * N):
        nxt = A.successors(w[-1])
        w.append(int(nxt[rng.integers(0, len(nxt))]))
    return ItineraryWindow(N, tuple(w))


# -- coding ----------------------------------------------------------------
@dataclass(frozen=True)
class BoundaryHit:
    """``f^j(x)`` lies on the boundary of the partition; ``cells`` are the closed cells holding it."""

    j: int
    cells: tuple[int, ...]


def _locate_exact(partition: MarkovPartition, p) -> tuple[int | None, tuple[int, ...]]:
    """Cell whose interior holds ``p``, else ``None`` with the closed cells holding it."""
    xy = np.array([float(p[0]) % 1.0, float(p[1]) % 1.0])
    closed = []
    for k in partition.index.near_point(xy):
        R = partition.cells[k]
        verdict = _float_inside(R, xy)
        if verdict is True:
            return k, (k,)
        if verdict is False:
            continue
        u, s = chart_offset(R, p)
        if R.iu[0] < u < R.iu[1] and R.is_[0] < s < R.is_[1]:
            return k, (k,)
        if R.iu[0] <= u <= R.iu[1] and R.is_[0] <= s <= R.is_[1]:
            closed.append(k)
    return None, tuple(closed)


def _orbit(f: ToralAutomorphism, x, N: int) -> list:
    """Exact ``f^j(x)`` for ``j = -N .. N``."""
    p = reduce_exact(*exact_point(f, x))
    fwd, back = [p], [p]
    for _ in range(N):
        fwd.append(reduce_exact(*f.map_exact(*fwd[-1])))
        back.append(reduce_exact(*f.map_inverse_exact(*back[-1])))
    return back[:0:-1] + fwd


def encode(f: ToralAutomorphism, partition: MarkovPartition, x, N: int) -> ItineraryWindow | BoundaryHit:
    """Itinerary of ``x`` through cell interiors, or the first boundary hit (smallest ``|j|``)."""
    orbit = _orbit(f, x, N)
    word = []
    hit = None
    for idx, p in enumerate(orbit):
        k, closed = _locate_exact(partition, p)
        j = idx - N
        if k is None:
            if hit is None or abs(j) < abs(hit.j):
                hit = BoundaryHit(j, closed)
            continue
        word.append(k)
    if hit is not None:
        return hit
    return ItineraryWindow(N, tuple(word))


def all_codes(f: ToralAutomorphism, partition: MarkovPartition, x, N: int, A: TransitionMatrix | None = None, limit: int = 256) -> list[ItineraryWindow]:
    """Every admissible window whose cylinder contains ``x`` (at most ``limit``)."""
    A = A if A is not None else transition_matrix(f, partition)
    orbit = _orbit(f, x, N)
    options = []
    for p in orbit:
        xy = np.array([float(p[0]) % 1.0, float(p[1]) % 1.0])
        opts = []
        for k in partition.index.near_point(xy):
            R = partition.cells[k]
            u, s = chart_offset(R, p)
            if R.iu[0] <= u <= R.iu[1] and R.is_[0] <= s <= R.is_[1]:
                opts.append(k)
        options.append(opts)
    out: list[ItineraryWindow] = []

    def extend(prefix: list[int]):
        if len(out) >= limit:
            return
        if len(prefix) == len(options):
            win = ItineraryWindow(N, tuple(prefix))
            K = _cylinder_box(f, partition, win)
            if K is not None and _closed_contains(K, orbit[N]):
                out.append(win)
            return
        for k in options[len(prefix)]:
            if not prefix or A.entries[prefix[-1], k]:
                extend(prefix + [k])

    extend([])
    return out


def _closed_contains(R: Rectangle, p) -> bool:
    u, s = chart_offset(R, p)
    return R.iu[0] <= u <= R.iu[1] and R.is_[0] <= s <= R.is_[1]


# -- cylinders and pi ------------------------------------------------------
@dataclass(frozen=True)
class CylinderIntersection:
    word: ItineraryWindow
    box: Rectangle
    diameter: float


def _cylinder_box(f: ToralAutomorphism, partition: MarkovPartition, word: ItineraryWindow) -> Rectangle | None:
    w = word.word
    N = word.N
    fwd = forward_cylinder(partition, w[N:])
    back = backward_cylinder(partition, w[: N + 1])
    if fwd is None or back is None:
        return None
    return intersect_box(fwd, back)


def cylinder(f: ToralAutomorphism, partition: MarkovPartition, word) -> CylinderIntersection:
    """``K_N(a)``: the points whose orbit visits ``R_{a_j}`` at every time ``|j| <= N``."""
    win = word if isinstance(word, ItineraryWindow) else ItineraryWindow.of(word)
    for a in win.word:
        if not 0 <= a < len(partition):
            raise IndexOutOfRange(f"symbol {a} outside 0..{len(partition) - 1}")
    K = _cylinder_box(f, partition, win)
    if K is None:
        raise EmptyCylinder(f"empty cylinder for {win}")
    return CylinderIntersection(win, K, K.diameter)


def pi_point(f: ToralAutomorphism, partition: MarkovPartition, word) -> tuple[TorusPoint, float]:
    """Centre of ``K_N(a)`` and half its diameter (every point of ``K_N`` is that close)."""
    K = cylinder(f, partition, word)
    c = K.box.center
    return TorusPoint(c[0], c[1]), K.diameter / 2


def semiconjugacy_residual(
    f: ToralAutomorphism,
    partition: MarkovPartition,
    word: ItineraryWindow,
    g: Callable[[TorusPoint], TorusPoint] | None = None,
) -> float:
    """``dist(pi(sigma a), g(pi(a)))`` with ``g = f`` unless given."""
    if word.N < 2:
        raise ValueError("need a window of half-width at least 2")
    g = g if g is not None else (lambda p: apply(f, p))
    x, _ = pi_point(f, partition, word)
    y, _ = pi_point(f, partition, shift(word))
    return torus_distance(y, g(x))


@dataclass(frozen=True)
class InjectivityReport:
    samples: int
    boundary_hits: int
    checked: int
    failures: int
    max_error: float
    max_radius: float


def injectivity_check(
    f: ToralAutomorphism,
    partition: MarkovPartition,
    samples: int = 1000,
    N: int = 15,
    rng: np.random.Generator | None = None,
    points: Sequence[TorusPoint] | None = None,
) -> InjectivityReport:
    """Round trip ``pi(encode(x))`` for points whose window avoids the boundary.

    A failure is a round-trip error above ``diam K_N``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = list(points) if points is not None else [TorusPoint(*rng.random(2)) for _ in range(samples)]
    hits = checked = failures = 0
    max_err = max_rad = 0.0
    for x in pts:
        code = encode(f, partition, x, N)
        if isinstance(code, BoundaryHit):
            hits += 1
            continue
        checked += 1
        y, rad = pi_point(f, partition, code)
        err = torus_distance(x, y)
        max_err = max(max_err, err)
        max_rad = max(max_rad, rad)
        if err > 2 * rad + FLOAT_MARGIN:
            failures += 1
    return InjectivityReport(len(pts), hits, checked, failures, max_err, max_rad)


# -- spectrum ----------------------------------------------------------------
def is_irreducible(A: TransitionMatrix) -> bool:
    n, _ = connected_components(csr_matrix(A.entries), directed=True, connection="strong")
    return n == 1


def perron_eigenvalue(A: TransitionMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Dominant eigenvalue by power iteration on ``A + I`` (aperiodic, same Perron vector)."""
    if not is_irreducible(A):
        warnings.warn("transition matrix is reducible", Reducible, stacklevel=2)
    M = csr_matrix(A.entries.astype(float))
    v = np.ones(A.m) / A.m
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v + v
        new = float(w.sum())
        w /= new
        if abs(new - lam) <= tol * new and np.abs(w - v).max() <= tol:
            lam = new
            break
        v, lam = w, new
    return lam - 1.0
