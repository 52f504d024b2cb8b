from __future__ import annotations

import math

import numpy as np
import pytest

from toralmarkov.partition import MarkovPartition
from toralmarkov.rectangles import contains, intersect_box, point_at
from toralmarkov.symbolic import (
    BoundaryHit,
    EmptyCylinder,
    IndexOutOfRange,
    ItineraryWindow,
    Reducible,
    TransitionMatrix,
    all_codes,
    cylinder,
    encode,
    injectivity_check,
    is_admissible,
    is_irreducible,
    perron_eigenvalue,
    pi_point,
    random_word,
    semiconjugacy_residual,
    shift,
    transition_matrix,
)
from toralmarkov.torus import TorusPoint, apply, iterate, torus_distance


@pytest.fixture(scope="module")
def coarse_matrix(cat, coarse_partition):
    return transition_matrix(cat, coarse_partition)


def decay(f):
    return max(abs(f.lambda_s), 1 / abs(f.lambda_u))


# -- transition matrix -----------------------------------------------------------
def test_matrix_rows_and_columns(cat_matrix):
    A = cat_matrix.entries
    assert A.shape[0] == A.shape[1]
    assert set(np.unique(A)) <= {0, 1}
    assert (A.sum(axis=1) >= 1).all() and (A.sum(axis=0) >= 1).all()
    assert is_irreducible(cat_matrix)


def test_matrix_matches_relabelling(cat, coarse_partition, coarse_matrix):
    perm = np.random.default_rng(3).permutation(len(coarse_partition))
    cells = tuple(coarse_partition.cells[k] for k in perm)
    B = transition_matrix(cat, MarkovPartition(cat, cells)).entries
    assert (B == coarse_matrix.entries[np.ix_(perm, perm)]).all()


def test_matrix_csv_round_trip(coarse_matrix):
    text = coarse_matrix.to_csv()
    assert text.count("\n") == coarse_matrix.m
    assert (TransitionMatrix.from_csv(text).entries == coarse_matrix.entries).all()


# -- words -------------------------------------------------------------------------
def test_admissibility(coarse_matrix):
    A = coarse_matrix
    assert is_admissible(A, [0])
    i, j = map(int, np.argwhere(A.entries == 0)[0])
    assert not is_admissible(A, [i, j])
    with pytest.raises(IndexOutOfRange):
        is_admissible(A, [0, A.m])


def test_random_words_are_admissible_and_shift_invariant(coarse_matrix, rng):
    for _ in range(50):
        w = random_word(coarse_matrix, 6, rng)
        assert is_admissible(coarse_matrix, w)
        s = shift(w)
        assert s.N == 5 and s[0] == w[1] and s[-5] == w[-4]
        assert is_admissible(coarse_matrix, s)


def test_window_shape():
    w = ItineraryWindow.of([3, 1, 4])
    assert w.N == 1 and w[-1] == 3 and str(w) == "3,1,4"
    with pytest.raises(ValueError):
        ItineraryWindow.of([1, 2])
    with pytest.raises(IndexError):
        w[2]
    with pytest.raises(ValueError):
        shift(ItineraryWindow.of([5]))


# -- coding ------------------------------------------------------------------------
def test_fixed_point_sits_on_cell_corners(cat, cat_partition, cat_matrix):
    hit = encode(cat, cat_partition, TorusPoint(0, 0), 5)
    assert isinstance(hit, BoundaryHit) and hit.j == 0 and len(hit.cells) >= 2
    codes = all_codes(cat, cat_partition, TorusPoint(0, 0), 3, cat_matrix)
    assert len(codes) == len(hit.cells)
    for w in codes:
        assert len(set(w.word)) == 1
        assert cat_matrix[w[0], w[0]] == 1


def test_face_point_is_a_boundary_hit(cat, coarse_partition):
    R = coarse_partition.cells[5]
    p = point_at(R, R.iu[0], R.is_[0] + R.width_s / 3)
    hit = encode(cat, coarse_partition, p, 4)
    assert isinstance(hit, BoundaryHit) and hit.j == 0


def test_encode_follows_the_orbit(cat, cat_partition, rng):
    for _ in range(30):
        x = TorusPoint(*rng.random(2))
        w = encode(cat, cat_partition, x, 10)
        assert isinstance(w, ItineraryWindow)
        for j in range(-10, 11):
            assert contains(cat_partition.cells[w[j]].interior(), iterate(cat, x, j))


def test_distinct_points_get_distinct_codes(cat, coarse_partition, rng):
    for _ in range(5):
        x = TorusPoint(*rng.random(2))
        d = rng.normal(size=2)
        y = TorusPoint(*(x.as_array() + 1e-9 * d / np.linalg.norm(d)))
        assert encode(cat, coarse_partition, x, 40) != encode(cat, coarse_partition, y, 40)


# -- cylinders and pi ----------------------------------------------------------------
def test_zero_window_cylinder_is_the_cell(cat, coarse_partition):
    K = cylinder(cat, coarse_partition, [7])
    R = coarse_partition.cells[7]
    assert K.box.iu == R.iu and K.box.is_ == R.is_


def test_cylinders_nest_and_shrink(cat, cat_partition, cat_matrix, rng):
    lam = decay(cat)
    rates = []
    for _ in range(20):
        w = random_word(cat_matrix, 15, rng).word
        prev = None
        diams = []
        for N in range(1, 16):
            K = cylinder(cat, cat_partition, w[15 - N: 16 + N]).box
            if prev is not None:
                m = intersect_box(K, prev)
                assert m.iu == K.iu and m.is_ == K.is_
            prev = K
            diams.append(K.diameter)
            if N >= 5:
                assert K.diameter <= 2 * cat_partition.diameter * lam ** (N - 1)
        # single steps depend on cell widths; the mean rate over N = 5..15 does not
        rate = (diams[4] / diams[14]) ** (1 / 10)
        rates.append(rate)
    assert np.mean(rates) == pytest.approx(1 / lam, rel=0.05)


def test_inadmissible_word_has_empty_cylinder(cat, coarse_partition, coarse_matrix):
    i, j = map(int, np.argwhere(coarse_matrix.entries == 0)[0])
    with pytest.raises(EmptyCylinder):
        cylinder(cat, coarse_partition, [i, j, j])
    with pytest.raises(IndexOutOfRange):
        cylinder(cat, coarse_partition, [0, 10_000, 0])


def test_constant_word_shrinks_to_fixed_point(cat, cat_partition, cat_matrix):
    k = all_codes(cat, cat_partition, TorusPoint(0, 0), 1, cat_matrix)[0][0]
    prev = math.inf
    for N in (2, 6, 10, 14):
        x, r = pi_point(cat, cat_partition, [k] * (2 * N + 1))
        assert torus_distance(x, TorusPoint(0, 0)) <= r * (1 + 1e-9)
        assert r < prev
        prev = r
    assert prev < 1e-5


def test_pi_of_nearby_windows(cat, cat_partition, cat_matrix, rng):
    w = random_word(cat_matrix, 12, rng)
    x, r = pi_point(cat, cat_partition, w)
    inner = ItineraryWindow(8, w.word[4:-4])
    y, _ = pi_point(cat, cat_partition, inner)
    assert torus_distance(x, y) <= cylinder(cat, cat_partition, inner).diameter


def test_semiconjugacy(cat, cat_partition, cat_matrix, rng):
    for _ in range(100):
        w = random_word(cat_matrix, 15, rng)
        res = semiconjugacy_residual(cat, cat_partition, w)
        bound = cylinder(cat, cat_partition, shift(w)).diameter + cylinder(cat, cat_partition, w).diameter
        assert res <= bound and res <= 1e-6


def test_semiconjugacy_constant_word(cat, cat_partition, cat_matrix):
    k = all_codes(cat, cat_partition, TorusPoint(0, 0), 1, cat_matrix)[0][0]
    w = ItineraryWindow.of([k] * 31)
    assert semiconjugacy_residual(cat, cat_partition, w) <= 1e-6


def test_semiconjugacy_negative_control(cat, cat_partition, cat_matrix, rng):
    f2 = lambda p: apply(cat, apply(cat, p))
    res = [semiconjugacy_residual(cat, cat_partition, random_word(cat_matrix, 15, rng), f2) for _ in range(20)]
    assert np.median(res) > 1e-2


def test_semiconjugacy_needs_width(cat, cat_partition):
    with pytest.raises(ValueError):
        semiconjugacy_residual(cat, cat_partition, ItineraryWindow.of([0, 0, 0]))


def test_round_trip_on_probe_grid(cat, cat_partition):
    g = (np.arange(12) + 0.37) / 12
    pts = [TorusPoint(x, y) for x in g for y in g]
    rep = injectivity_check(cat, cat_partition, N=15, points=pts)
    assert rep.failures == 0 and rep.checked + rep.boundary_hits == len(pts)
    assert rep.checked > 0.9 * len(pts)


def test_round_trip_random(cat, cat_partition, rng):
    rep = injectivity_check(cat, cat_partition, 200, N=15, rng=rng)
    assert rep.failures == 0 and rep.max_error <= 2 * rep.max_radius


# -- spectrum --------------------------------------------------------------------------
def test_perron_trivial_cases():
    assert perron_eigenvalue(TransitionMatrix(np.array([[1]]))) == pytest.approx(1.0)
    assert perron_eigenvalue(TransitionMatrix(np.ones((5, 5), dtype=np.uint8))) == pytest.approx(5.0)
    assert perron_eigenvalue(TransitionMatrix(np.array([[0, 1], [1, 0]]))) == pytest.approx(1.0)


def test_perron_warns_when_reducible():
    A = TransitionMatrix(np.eye(3, dtype=np.uint8))
    assert not is_irreducible(A)
    with pytest.warns(Reducible):
        assert perron_eigenvalue(A) == pytest.approx(1.0)


def test_perron_matches_unstable_eigenvalue(cat, cat_matrix, coarse_matrix):
    assert perron_eigenvalue(cat_matrix) == pytest.approx(cat.lambda_u, abs=1e-3)
    assert perron_eigenvalue(coarse_matrix) == pytest.approx(cat.lambda_u, abs=1e-3)
