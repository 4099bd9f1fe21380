import random

import numpy as np
import pytest
from hypothesis import strategies as st

from colucb.core import GroupStructure, bernoulli_instance, gaussian_instance
from colucb.selftest import random_structure

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def random_instance(rng: random.Random, max_groups=6, max_arms=8, kind="gaussian"):
    s = random_structure(rng, max_groups, max_arms)
    means = [round(rng.random(), 3) for _ in range(s.num_arms)]
    return gaussian_instance(s, means) if kind == "gaussian" else bernoulli_instance(s, means)


@st.composite
def structures(draw, max_groups=6, max_arms=8):
    n = draw(st.integers(2, max_arms))
    G = draw(st.integers(1, max_groups))
    groups = [draw(st.sets(st.integers(0, n - 1), min_size=2, max_size=n)) for _ in range(G)]
    missing = set(range(n)) - set().union(*groups)
    groups[0] = groups[0] | missing
    return GroupStructure.from_lists(n, [sorted(g) for g in groups])


@pytest.fixture
def chain():
    """Two overlapping groups {0,1}, {1,2}."""
    return GroupStructure.from_lists(3, [[0, 1], [1, 2]])
