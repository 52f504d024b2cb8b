"""Acceptance criteria, one test each; results are printed in the terminal summary."""
from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE
from toralmarkov.cli import EXIT_OK, RunConfig, cmd_build
from toralmarkov.local_product import bracket, make_budget
from toralmarkov.partition import (
    build_cover,
    build_partition,
    check_boundary_invariance,
    perturb_cell,
    validate_partition,
    verify_markov,
)
from toralmarkov.shadowing import orbit_distances, pseudo_orbit, shadow
from toralmarkov.symbolic import (
    BoundaryHit,
    cylinder,
    encode,
    perron_eigenvalue,
    pi_point,
    random_word,
    semiconjugacy_residual,
    transition_matrix,
)
from toralmarkov.torus import TorusPoint, apply, displacement, torus_distance

LAMBDA_U = 2.6180339887


def record(k: int, name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (name, bool(ok), detail)
    assert ok, detail


@pytest.fixture(scope="module")
def partition(cat):
    """The partition the build command produces for beta = 0.1."""
    return build_partition(cat, build_cover(cat, make_budget(cat, 0.05, strict=False)))


@pytest.fixture(scope="module")
def matrix(cat, partition):
    return transition_matrix(cat, partition)


def test_shadowing_bound(cat):
    rng = np.random.default_rng(1)
    delta, N, bound = 1e-3, 50, 1.62e-3
    failures = 0
    worst = 0.0
    for _ in range(200):
        q = [TorusPoint(*rng.random(2))]
        for _ in range(2 * N):
            r = 0.999 * delta * math.sqrt(rng.random())
            t = rng.random() * 2 * math.pi
            p = apply(cat, q[-1])
            q.append(TorusPoint(p.x + r * math.cos(t), p.y + r * math.sin(t)))
        po = pseudo_orbit(cat, q)
        # the float point is useless after 50 expanding steps; iterate the exact one
        d = orbit_distances(cat, po, shadow(cat, po).point_exact)
        worst = max(worst, float(d.max()))
        failures += int((d > bound).any())
    record(1, "shadowing bound", failures == 0, f"200 orbits, {failures} failures, max distance {worst:.3e} <= {bound}")


def test_bracket_identities(cat):
    rng = np.random.default_rng(2)
    budget = make_budget(cat, 0.005)

    def pair(scale):
        x = TorusPoint(*rng.random(2))
        v = rng.normal(size=2)
        v *= scale * budget.delta * math.sqrt(rng.random()) / np.linalg.norm(v)
        return x, TorusPoint(*(x.as_array() + v))

    member = equi = 0.0
    fixed = 0
    for _ in range(1000):
        x, y = pair(0.999)
        fixed += bracket(cat, budget, x, x) != x
        z = bracket(cat, budget, x, y)
        member = max(member, abs(displacement(cat, x, z, strict=False).du), abs(displacement(cat, y, z, strict=False).ds))
        # images must stay within delta too, so these pairs are shrunk by the operator norm
        x, y = pair(0.999 / cat.operator_norm)
        lhs = apply(cat, bracket(cat, budget, x, y))
        equi = max(equi, torus_distance(lhs, bracket(cat, budget, apply(cat, x), apply(cat, y))))
    ok = fixed == 0 and member <= 1e-12 and equi <= 1e-12
    record(2, "bracket identities", ok,
           f"[x,x]!=x in {fixed}/1000, membership residual {member:.1e}, equivariance residual {equi:.1e}")


def test_partition_validity(partition):
    rep = validate_partition(partition)
    ok = (abs(float(rep.area_sum) - 1) <= 1e-9 and rep.overlaps == 0 and rep.improper == 0
          and rep.uncovered == 0 and partition.diameter < 0.1)
    record(3, "partition validity", ok,
           f"{len(partition)} cells, area sum {float(rep.area_sum)!r}, {rep.overlaps} overlaps, "
           f"{rep.improper} improper, max diameter {partition.diameter:.4f} < 0.1")


def test_markov_conditions(cat, partition):
    rep = verify_markov(cat, partition, samples=100, rng=np.random.default_rng(4))
    control = verify_markov(cat, perturb_cell(partition, 0), samples=100, rng=np.random.default_rng(4))
    ok = rep.ok and len(control.violations) >= 1
    record(4, "Markov conditions", ok,
           f"{rep.pairs} pairs, {rep.samples} samples, {len(rep.violations)} violations; "
           f"perturbed control {len(control.violations)} violations")


def test_boundary_invariance(partition):
    n, bad = check_boundary_invariance(partition)
    record(5, "boundary invariance", not bad, f"{n} faces checked exactly, {len(bad)} not covered")


def test_cylinder_decay(cat, partition, matrix):
    rng = np.random.default_rng(6)
    lam = max(abs(cat.lambda_s), 1 / abs(cat.lambda_u))
    bad = 0
    rates = []
    for _ in range(100):
        w = random_word(matrix, 15, rng).word
        diams = []
        for N in range(5, 16):
            K = cylinder(cat, partition, w[15 - N: 16 + N])
            diams.append(K.diameter)
            bad += K.diameter > 2 * partition.diameter * lam ** (N - 1)
        rates.append((diams[0] / diams[-1]) ** (1 / 10))
    record(6, "cylinder decay", bad == 0,
           f"100 words, N=5..15, {bad} over bound, mean contraction per step {np.mean(rates):.4f} "
           f"vs 1/max(|lambda_s|,1/lambda_u) = {1 / lam:.4f}")


def test_semiconjugacy(cat, partition, matrix):
    rng = np.random.default_rng(7)
    res = max(semiconjugacy_residual(cat, partition, random_word(matrix, 15, rng)) for _ in range(100))
    hits = failures = 0
    worst = 0.0
    for _ in range(1000):
        x = TorusPoint(*rng.random(2))
        code = encode(cat, partition, x, 15)
        if isinstance(code, BoundaryHit):
            hits += 1
            continue
        y, radius = pi_point(cat, partition, code)
        err = torus_distance(x, y)
        worst = max(worst, err / (2 * radius))
        failures += err > 2 * radius
    ok = res <= 1e-6 and failures == 0 and hits == 0
    record(7, "semiconjugacy", ok,
           f"max residual {res:.1e}; round trip {failures} failures, {hits} boundary hits, "
           f"max error/diam K_N {worst:.3f}")


def test_perron_eigenvalue(matrix):
    lam = perron_eigenvalue(matrix)
    record(8, "Perron eigenvalue", abs(lam - LAMBDA_U) <= 1e-3,
           f"{lam:.10f} vs {LAMBDA_U} (|diff| {abs(lam - LAMBDA_U):.1e})")


def test_determinism(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [cmd_build(RunConfig((2, 1, 1, 1), beta=0.1, seed=42, out=str(d))) for d in (a, b)]
    capsys.readouterr()
    same = [n for n in ("partition.json", "matrix.csv", "report.txt") if (a / n).read_bytes() == (b / n).read_bytes()]
    record(9, "determinism", codes == [EXIT_OK, EXIT_OK] and len(same) == 3,
           f"exit codes {codes}, identical files: {', '.join(same)}")
