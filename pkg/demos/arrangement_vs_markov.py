"""Compare the cell arrangement of a cover by translated boxes with the skeleton partition.

Both are partitions by proper rectangles; only the second satisfies the Markov
fiber conditions.  Takes about half a minute.
"""
from __future__ import annotations

import numpy as np

from toralmarkov.partition import (
    arrangement_partition,
    build_partition,
    product_cover,
    validate_partition,
    verify_markov,
)
from toralmarkov.shadowing import DenseNet
from toralmarkov.torus import make_automorphism

f = make_automorphism([[2, 1], [1, 1]])
cover = product_cover(f, DenseNet(0.2, 4), 0.175)
print(f"cover: {len(cover)} boxes of half width 0.175 on a 4x4 net")

for name, P in (("arrangement", arrangement_partition(f, cover)), ("skeleton", build_partition(f, target=0.3))):
    rep = validate_partition(P, probe=100)
    markov = verify_markov(f, P, samples=2, words=5, rng=np.random.default_rng(0))
    print(f"{name:11s}: {len(P):4d} cells, valid {rep.ok}, Markov violations {len(markov.violations)}")
