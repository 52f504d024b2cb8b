"""Local product structure: fibers, the bracket and the constants budget."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .shadowing import expansivity_constant
from .torus import ToralAutomorphism, TorusPoint, displacement, hyperbolicity_constants

__all__ = [
    "BudgetInfeasible",
    "ConstantsBudget",
    "EpsilonExceeded",
    "FiberSegment",
    "TooFar",
    "bracket",
    "fiber",
    "make_budget",
    "product_point",
]

Direction = Literal["s", "u"]


class TooFar(ValueError):
    """Bracket arguments are not within ``delta`` of each other."""


class EpsilonExceeded(ValueError):
    """Bracket point leaves the local fibers of size ``epsilon``."""


class BudgetInfeasible(ValueError):
    """No admissible constants exist for the requested ``beta``."""


@dataclass(frozen=True)
class ConstantsBudget:
    """The chain ``rho, epsilon, delta, beta, alpha, gamma`` used to build covers."""

    rho: float
    epsilon: float
    delta: float
    beta: float
    alpha: float
    gamma: float

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.epsilon <= self.rho / 4:
            out.append("epsilon must lie in (0, rho/4]")
        if not 0 < self.beta:
            out.append("beta must be positive")
        if not 2 * self.beta < min(self.epsilon, self.delta / 2):
            out.append("2*beta must be below min(epsilon, delta/2)")
        if not 0 < self.alpha < self.beta:
            out.append("alpha must lie in (0, beta)")
        if not 0 < self.gamma < min(self.beta, self.alpha / 2):
            out.append("gamma must lie in (0, min(beta, alpha/2))")
        return out

    @property
    def feasible(self) -> bool:
        return not self.violations()


def _bracket_delta(f: ToralAutomorphism, epsilon: float) -> float:
    """Largest ``delta`` whose brackets stay within ``epsilon/2`` along both orbits.

    The pseudo-orbit that follows ``x`` forwards and ``y`` backwards is
    shadowed by ``[x, y]``; its worst deviation is the stable offset at time 0
    or the unstable offset at time -1.
    """
    r_u, r_s = np.linalg.norm(f.basis_inverse, axis=1)
    return (epsilon / 2) / max(r_s, r_u / abs(f.lambda_u))


def make_budget(f: ToralAutomorphism, beta_target: float, strict: bool = True) -> ConstantsBudget:
    """Derive all constants from ``beta_target``.

    ``epsilon`` sits just inside ``rho/4``; ``alpha`` is the largest pseudo-orbit
    defect whose shadows stay ``beta``-close; ``gamma`` is small enough that
    jumps between net points within ``gamma`` of an orbit stay ``alpha``-pseudo.
    With ``strict`` an infeasible chain raises BudgetInfeasible.
    """
    rho = expansivity_constant(f)
    epsilon = 0.99 * rho / 4
    delta = min(_bracket_delta(f, epsilon), epsilon / 2)
    beta = float(beta_target)
    _, lam = hyperbolicity_constants(f)
    alpha = beta * (1 - lam) / 2
    gamma = min(beta, alpha / 2) / (1 + f.operator_norm)
    b = ConstantsBudget(rho, epsilon, delta, beta, alpha, gamma)
    bad = b.violations()
    if strict and bad:
        raise BudgetInfeasible(f"beta={beta_target}: " + "; ".join(bad))
    return b


@dataclass(frozen=True)
class FiberSegment:
    """A piece of an eigenline through ``base`` in unit coordinates ``[lo, hi]``."""

    base: TorusPoint
    direction: Direction
    lo: float
    hi: float

    def __post_init__(self):
        if self.direction not in ("s", "u"):
            raise ValueError(f"direction must be 's' or 'u', got {self.direction!r}")
        if not self.lo <= 0 <= self.hi:
            raise ValueError("fiber segment must contain its base")
        if self.hi - self.lo >= 0.5:
            raise ValueError("fiber segment must be shorter than 1/2")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def point_at(self, f: ToralAutomorphism, t: float) -> TorusPoint:
        v = f.e_s if self.direction == "s" else f.e_u
        return TorusPoint(self.base.x + t * v[0], self.base.y + t * v[1])

    def sample(self, f: ToralAutomorphism, n: int) -> list[TorusPoint]:
        return [self.point_at(f, t) for t in np.linspace(self.lo, self.hi, n)]


def fiber(x: TorusPoint, direction: Direction, half_width: float) -> FiberSegment:
    """Symmetric local fiber ``W^s_h(x)`` or ``W^u_h(x)``."""
    if not 0 <= half_width < 0.25:
        raise ValueError(f"half width must lie in [0, 1/4), got {half_width}")
    return FiberSegment(x, direction, -float(half_width), float(half_width))


def product_point(f: ToralAutomorphism, x: TorusPoint, u: float, s: float) -> TorusPoint:
    """``x`` moved by ``u`` along ``e_u`` then ``s`` along ``e_s``."""
    v = f.unit_vector(u, s)
    return TorusPoint(x.x + v[0], x.y + v[1])


def bracket(f: ToralAutomorphism, budget: ConstantsBudget, x: TorusPoint, y: TorusPoint) -> TorusPoint:
    """``[x, y]``: the point on the stable fiber of ``x`` and the unstable fiber of ``y``."""
    d = displacement(f, y, x, strict=False)
    if math.hypot(*d.lift) >= budget.delta:
        raise TooFar(f"dist({x}, {y}) >= delta = {budget.delta}")
    if abs(d.du) > budget.epsilon or abs(d.ds) > budget.epsilon:
        raise EpsilonExceeded(f"offsets ({d.du:.3g}, {d.ds:.3g}) exceed epsilon = {budget.epsilon}")
    return product_point(f, y, d.du, 0.0)
