"""Markov partitions and symbolic dynamics for hyperbolic toral automorphisms."""

from .torus import (
    AmbiguousLift,
    NotHyperbolic,
    NotUnimodular,
    ToralAutomorphism,
    TorusPoint,
    apply,
    apply_inverse,
    displacement,
    hyperbolicity_constants,
    iterate,
    make_automorphism,
    torus_distance,
)

__all__ = [
    "AmbiguousLift",
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
    "torus_distance",
]
