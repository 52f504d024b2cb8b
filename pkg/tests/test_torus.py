from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toralmarkov.torus import (
    AmbiguousLift,
    NotHyperbolic,
    NotUnimodular,
    TorusPoint,
    apply,
    apply_inverse,
    displacement,
    hyperbolicity_constants,
    iterate,
    make_automorphism,
    parse_matrix,
    torus_distance,
)

unit = st.floats(min_value=0, max_value=1, exclude_max=True, allow_nan=False)
points = st.builds(TorusPoint, unit, unit)


def test_cat_map_eigenvalues(cat):
    assert cat.lambda_u == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-12)
    assert cat.lambda_s == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-12)
    assert cat.lambda_u == pytest.approx(2.6180339887, abs=1e-10)


def test_fibonacci_eigenvalues_keep_sign(fib):
    assert fib.lambda_u == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-12)
    assert fib.lambda_s == pytest.approx((1 - math.sqrt(5)) / 2, abs=1e-12)
    assert fib.det == -1


@pytest.mark.parametrize("m, err", [
    ([[1, 0], [0, 1]], NotHyperbolic),
    ([[0, -1], [1, 0]], NotHyperbolic),
    ([[1, 1], [0, 1]], NotHyperbolic),
    ([[2, 0], [0, 1]], NotUnimodular),
    ([[3, 1], [1, 1]], NotUnimodular),
])
def test_rejected_matrices(m, err):
    with pytest.raises(err):
        make_automorphism(m)


def test_non_integer_entries_rejected():
    with pytest.raises(ValueError):
        make_automorphism([[2.5, 1], [1, 1]])


@pytest.mark.parametrize("m", [[[2, 1], [1, 1]], [[1, 1], [1, 0]], [[3, 1], [2, 1]], [[-2, 1], [1, -1]], [[0, 1], [1, 3]]])
def test_eigen_data(m):
    f = make_automorphism(m)
    A = np.array(m, dtype=float)
    assert np.linalg.norm(A @ f.e_u - f.lambda_u * f.e_u) <= 1e-12
    assert np.linalg.norm(A @ f.e_s - f.lambda_s * f.e_s) <= 1e-12
    assert f.lambda_u * f.lambda_s == pytest.approx(f.det, abs=1e-12)
    assert abs(f.lambda_u) > 1 > abs(f.lambda_s)
    assert abs(np.linalg.det(f.basis)) > 1e-6
    # exact eigenvectors
    for lam, w in ((f.lam_u, f.w_u), (f.lam_s, f.w_s)):
        img = f.map_exact(*w)
        assert img[0] == lam * w[0] and img[1] == lam * w[1]


@pytest.mark.parametrize("p, q", [
    ((0.0, 0.0), (0.0, 0.0)),
    ((0.5, 0.5), (0.5, 0.0)),
    ((0.25, 0.5), (0.0, 0.75)),
])
def test_apply_examples(cat, p, q):
    r = apply(cat, TorusPoint(*p))
    assert (r.x, r.y) == q


def test_parse_matrix():
    assert parse_matrix("2,1,1,1") == ((2, 1), (1, 1))
    with pytest.raises(ValueError):
        parse_matrix("2,1,1")


@given(points)
def test_inverse_round_trip(p):
    f = make_automorphism([[2, 1], [1, 1]])
    back = apply_inverse(f, apply(f, p))
    assert torus_distance(back, p) <= 1e-12


def test_displacement_examples(cat):
    p = TorusPoint(0, 0)
    assert displacement(cat, p, p).du == 0 and displacement(cat, p, p).ds == 0
    t = 0.01
    q = TorusPoint(*(t * cat.e_u))
    d = displacement(cat, p, q)
    assert d.du == pytest.approx(t, abs=1e-12) and abs(d.ds) <= 1e-12
    d = displacement(cat, TorusPoint(0.9, 0.9), TorusPoint(0.1, 0.1))
    assert d.lift == pytest.approx((0.2, 0.2))
    assert np.allclose(cat.unit_vector(d.du, d.ds), [0.2, 0.2], atol=1e-12)


def test_displacement_tie_flagged(cat):
    p, q = TorusPoint(0, 0), TorusPoint(0.5, 0.1)
    with pytest.raises(AmbiguousLift):
        displacement(cat, p, q)
    d = displacement(cat, p, q, strict=False)
    assert d.ambiguous and d.lift[0] == -0.5


@given(points, points)
def test_displacement_antisymmetric_and_metric(p, q):
    f = make_automorphism([[2, 1], [1, 1]])
    d1 = displacement(f, p, q, strict=False)
    d2 = displacement(f, q, p, strict=False)
    if not (d1.ambiguous or d2.ambiguous):
        assert d1.du == pytest.approx(-d2.du, abs=1e-12)
        assert d1.ds == pytest.approx(-d2.ds, abs=1e-12)
    assert np.linalg.norm(f.unit_vector(d1.du, d1.ds)) == pytest.approx(torus_distance(p, q), abs=1e-12)


@pytest.mark.parametrize("m, lam", [([[2, 1], [1, 1]], 0.3819660113), ([[1, 1], [1, 0]], 0.6180339887)])
def test_hyperbolicity_constants(m, lam):
    K, l = hyperbolicity_constants(make_automorphism(m))
    assert K == 1
    assert l == pytest.approx(lam, abs=1e-10)


@given(points, st.floats(min_value=-0.1, max_value=0.1))
def test_stable_contraction(x, s):
    f = make_automorphism([[2, 1], [1, 1]])
    y = TorusPoint(*(x.as_array() + s * f.e_s))
    d0 = torus_distance(x, y)
    fx, fy = apply(f, x), apply(f, y)
    assert torus_distance(fx, fy) == pytest.approx(abs(f.lambda_s) * d0, abs=1e-10)
    assert abs(displacement(f, fx, fy, strict=False).du) <= 1e-10
    # float rounding in y is amplified along e_u, so the slack grows like lambda_u^n
    for n in range(21):
        slack = 1e-15 * f.lambda_u ** n
        assert torus_distance(iterate(f, x, n), iterate(f, y, n)) <= abs(f.lambda_s) ** n * d0 + slack


def test_points_reduce_into_unit_square():
    p = TorusPoint(-1e-20, 1.0)
    assert 0 <= p.x < 1 and 0 <= p.y < 1
