from __future__ import annotations

import numpy as np
import pytest

from toralmarkov.partition import build_partition
from toralmarkov.symbolic import transition_matrix
from toralmarkov.torus import make_automorphism

CAT = ((2, 1), (1, 1))
FIB = ((1, 1), (1, 0))

# filled by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture(scope="session")
def cat():
    return make_automorphism(CAT)


@pytest.fixture(scope="session")
def fib():
    return make_automorphism(FIB)


@pytest.fixture(scope="session")
def cat_partition(cat):
    return build_partition(cat, target=0.1)


@pytest.fixture(scope="session")
def coarse_partition(cat):
    """A cheap partition for tests that only need the Markov structure."""
    return build_partition(cat, target=0.3)


@pytest.fixture(scope="session")
def cat_matrix(cat, cat_partition):
    return transition_matrix(cat, cat_partition)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k}. {name}: {detail}")
