"""Exact arithmetic in a real quadratic field Q(sqrt(D)).

The eigenvalues and eigenvectors of a hyperbolic integer 2x2 matrix live in
Q(sqrt(D)) with D = trace**2 - 4*det, so every partition endpoint, every image
of an endpoint under the map and every comparison between them can be carried
out without rounding.  Coefficients are gmpy2 rationals.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

from gmpy2 import mpq

__all__ = ["QNum", "to_q", "qfloor", "qmin", "qmax"]


def _as_mpq(x) -> mpq:
    if isinstance(x, float):
        # binary floats are exact dyadic rationals
        return mpq(*x.as_integer_ratio())
    if isinstance(x, (int, Fraction, Rational)) or type(x) is type(mpq(0)):
        return mpq(x)
    if hasattr(x, "dtype"):  # numpy scalar
        return _as_mpq(x.item())
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


class QNum:
    """An element ``a + b*sqrt(D)`` with rational ``a`` and ``b``.

    Instances are immutable.  Mixed arithmetic with ints, Fractions, mpq and
    floats is exact (floats are taken at their binary value).
    """

    __slots__ = ("a", "b", "d", "_hash")

    def __init__(self, a=0, b=0, d: int = 0):
        self.a = _as_mpq(a)
        self.b = _as_mpq(b)
        if self.b and d <= 0:
            raise ValueError("irrational part needs a positive radicand")
        self.d = int(d)
        self._hash = None

    @classmethod
    def _raw(cls, a, b, d):
        obj = object.__new__(cls)
        obj.a = a
        obj.b = b
        obj.d = d
        obj._hash = None
        return obj

    def _coerce(self, other):
        if isinstance(other, QNum):
            if other.d != self.d and other.b and self.b:
                raise ValueError(f"mixing Q(sqrt({self.d})) and Q(sqrt({other.d}))")
            return other
        return QNum._raw(_as_mpq(other), mpq(0), self.d)

    def _field(self, other: QNum) -> int:
        return self.d if self.b or not other.b else other.d

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        return QNum._raw(self.a + o.a, self.b + o.b, self._field(o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return QNum._raw(self.a - o.a, self.b - o.b, self._field(o))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return QNum._raw(-self.a, -self.b, self.d)

    def __pos__(self):
        return self

    def __mul__(self, other):
        o = self._coerce(other)
        d = self._field(o)
        return QNum._raw(self.a * o.a + self.b * o.b * d, self.a * o.b + self.b * o.a, d)

    __rmul__ = __mul__

    def conjugate(self) -> QNum:
        return QNum._raw(self.a, -self.b, self.d)

    def norm(self) -> mpq:
        """Field norm ``a**2 - D*b**2`` (a rational)."""
        return self.a * self.a - self.b * self.b * self.d

    def __truediv__(self, other):
        o = self._coerce(other)
        if not o.b:
            if not o.a:
                raise ZeroDivisionError("division by zero in Q(sqrt(D))")
            return QNum._raw(self.a / o.a, self.b / o.a, self.d)
        n = o.norm()
        num = self * o.conjugate()
        return QNum._raw(num.a / n, num.b / n, num.d)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __abs__(self):
        return -self if self.sign() < 0 else self

    # ordering -----------------------------------------------------------
    def sign(self) -> int:
        a, b = self.a, self.b
        if not b:
            return (a > 0) - (a < 0)
        if not a:
            return 1 if b > 0 else -1
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a**2 with D*b**2 (never equal, sqrt(D) irrational)
        bigger_a = a * a > b * b * self.d
        return (1 if a > 0 else -1) if bigger_a else (1 if b > 0 else -1)

    def _cmp(self, other) -> int:
        return (self - other).sign()

    def __eq__(self, other):
        if isinstance(other, (QNum, int, float, Fraction)) or type(other) is type(mpq(0)):
            o = self._coerce(other)
            return self.a == o.a and self.b == o.b
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.a, self.b)) if self.b else hash(self.a)
        return self._hash

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    # conversion ---------------------------------------------------------
    def __float__(self) -> float:
        a, b = self.a, self.b
        if not b:
            return float(a)
        r = math.sqrt(self.d)
        if (a > 0) != (b > 0) and a:
            # avoid cancellation: a + b r = (a^2 - b^2 D) / (a - b r)
            return float(self.norm()) / (float(a) - float(b) * r)
        return float(a) + float(b) * r

    def __repr__(self):
        if not self.b:
            return f"QNum({self.a})"
        return f"QNum({self.a} + {self.b}*sqrt({self.d}))"

    def to_json(self) -> list[str]:
        """Serialize as ``[a, b]`` rational strings (the radicand is stored once per file)."""
        return [str(self.a), str(self.b)]

    @classmethod
    def from_json(cls, pair, d: int) -> QNum:
        return cls(mpq(pair[0]), mpq(pair[1]), d)


def to_q(x, d: int = 0) -> QNum:
    """Coerce a number (int, rational, float, QNum) to a QNum."""
    if isinstance(x, QNum):
        return x
    return QNum._raw(_as_mpq(x), mpq(0), d)


def qfloor(x: QNum) -> int:
    """Exact floor of a field element."""
    n = math.floor(float(x))
    while x < n:
        n -= 1
    while x >= n + 1:
        n += 1
    return n


def qmin(x, y):
    return x if x <= y else y


def qmax(x, y):
    return x if x >= y else y

