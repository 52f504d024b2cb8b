"""Build a Markov partition for the cat map and look at its symbolic dynamics.

Run with ``python3 demos/cat_map_partition.py``.
"""
from __future__ import annotations

import numpy as np

from toralmarkov.partition import build_partition, check_boundary_invariance, validate_partition, verify_markov
from toralmarkov.symbolic import encode, is_irreducible, perron_eigenvalue, pi_point, transition_matrix
from toralmarkov.torus import TorusPoint, make_automorphism, torus_distance

f = make_automorphism([[2, 1], [1, 1]])
print(f"cat map: lambda_u = {f.lambda_u:.6f}, lambda_s = {f.lambda_s:.6f}")

# Cells are cut out by a stable and an unstable segment through the fixed point,
# grown until every piece is small enough.
P = build_partition(f, target=0.1)
rep = validate_partition(P)
print(f"{len(P)} cells, max diameter {P.diameter:.4f}, area sum {float(rep.area_sum)}, overlaps {rep.overlaps}")

markov = verify_markov(f, P, samples=20, rng=np.random.default_rng(0))
faces, bad = check_boundary_invariance(P)
print(f"Markov check: {markov.samples} samples over {markov.pairs} pairs, {len(markov.violations)} violations")
print(f"boundary faces mapped into the boundary: {faces - len(bad)}/{faces}")

A = transition_matrix(f, P)
print(f"transition matrix {A.m}x{A.m}, irreducible: {is_irreducible(A)}")
print(f"Perron eigenvalue {perron_eigenvalue(A):.10f} (entropy log lambda_u = {np.log(f.lambda_u):.6f})")

# Code a point, then recover it from its itinerary.
x = TorusPoint(0.1234, 0.5678)
for N in (2, 6, 10):
    word = encode(f, P, x, N)
    y, r = pi_point(f, P, word)
    print(f"N={N:2d}: error {torus_distance(x, y):.2e}, cylinder radius {r:.2e}")
