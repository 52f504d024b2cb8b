from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toralmarkov.quadratic import QNum, qfloor, to_q

small = st.fractions(min_value=-50, max_value=50, max_denominator=1000)
radicands = st.sampled_from([2, 5, 8, 12, 13, 21])


def test_sqrt5_squares_to_five():
    r = QNum(0, 1, 5)
    assert r * r == 5


def test_golden_ratio_identity():
    phi = QNum(Fraction(1, 2), Fraction(1, 2), 5)
    assert phi * phi == phi + 1
    assert 1 / phi == phi - 1


def test_float_inputs_are_exact():
    assert QNum(0.1).a == Fraction(*0.1.as_integer_ratio())


@given(small, small, small, small, radicands)
def test_field_operations_match_floats(a, b, c, d, D):
    x, y = QNum(a, b, D), QNum(c, d, D)
    r = math.sqrt(D)
    fx, fy = float(a) + float(b) * r, float(c) + float(d) * r
    assert float(x + y) == pytest.approx(fx + fy, abs=1e-9)
    assert float(x * y) == pytest.approx(fx * fy, rel=1e-9, abs=1e-9)
    if y:
        assert float(x / y) * fy == pytest.approx(fx, rel=1e-6, abs=1e-6)


@given(small, small, radicands)
def test_sign_matches_float_and_is_exact(a, b, D):
    x = QNum(a, b, D)
    v = float(a) + float(b) * math.sqrt(D)
    if abs(v) > 1e-9:
        assert x.sign() == (1 if v > 0 else -1)
    assert (x - x).sign() == 0


@given(small, small, radicands)
@settings(max_examples=200)
def test_floor_brackets_value(a, b, D):
    x = QNum(a, b, D)
    n = qfloor(x)
    assert n <= x < n + 1


def test_cancellation_safe_float():
    # (1 + sqrt 2)^20 has a tiny conjugate; the conjugate must still convert accurately
    x = QNum(1, 1, 2)
    p = to_q(1, 2)
    for _ in range(20):
        p = p * x
    c = p.conjugate()
    assert float(c) == pytest.approx((1 - math.sqrt(2)) ** 20, rel=1e-12)


def test_json_round_trip():
    x = QNum(Fraction(3, 7), Fraction(-2, 9), 5)
    assert QNum.from_json(x.to_json(), 5) == x


def test_mixed_radicands_rejected():
    with pytest.raises(ValueError):
        QNum(0, 1, 5) + QNum(0, 1, 2)
