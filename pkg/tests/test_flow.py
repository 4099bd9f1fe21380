import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings

from colucb.core import GroupStructure, all_shared, disjoint
from colucb.flow import FlowError, burn_in_schedule, compute_t0, max_flow, t0_enumeration, t0_fraction, t_min
from colucb.oracles import min_cut_enumeration
from conftest import structures


class TestMaxFlow:
    def test_single_edge(self):
        assert max_flow(2, [(0, 1, 7)], 0, 1)[0] == 7

    def test_diamond(self):
        value, flows = max_flow(4, [(0, 1, 1), (0, 2, 1), (1, 3, 1), (2, 3, 1)], 0, 3)
        assert value == 2 and flows == [1, 1, 1, 1]

    def test_random_graphs_match_min_cut(self):
        rng = random.Random(0)
        for _ in range(50):
            edges = [(u, v, 1) for u in range(10) for v in range(10) if u != v and rng.random() < 0.25]
            assert max_flow(10, edges, 0, 9)[0] == min_cut_enumeration(10, edges, 0, 9)

    def test_flow_conservation(self):
        rng = random.Random(1)
        edges = [(u, v, rng.randint(0, 4)) for u in range(7) for v in range(7) if u != v and rng.random() < 0.4]
        value, flows = max_flow(7, edges, 0, 6)
        net = np.zeros(7)
        for (u, v, c), f in zip(edges, flows):
            assert 0 <= f <= c
            net[u] -= f
            net[v] += f
        assert net[6] == value and net[0] == -value
        assert np.all(net[1:6] == 0)

    @pytest.mark.parametrize("edges", [[(0, 5, 1)], [(0, 1, -1)], [(0, 1, 1.5)]])
    def test_malformed(self, edges):
        with pytest.raises(FlowError):
            max_flow(2, edges, 0, 1)


class TestT0:
    @pytest.mark.parametrize("structure,expected", [
        (all_shared(4, 8), 2),
        (disjoint([2, 3, 5]), 5),
        (GroupStructure.from_lists(2, [[0, 1]]), 2),
    ])
    def test_examples(self, structure, expected):
        assert compute_t0(structure) == pytest.approx(expected, abs=1e-9)
        assert t0_fraction(structure) == expected

    @settings(max_examples=150, deadline=None)
    @given(structures(max_groups=8, max_arms=12))
    def test_lp_equals_subset_dual(self, s):
        assert abs(compute_t0(s) - float(t0_enumeration(s))) <= 1e-9

    @settings(max_examples=150, deadline=None)
    @given(structures(max_groups=8, max_arms=12))
    def test_bounds(self, s):
        t0 = t0_fraction(s)
        assert Fraction(s.num_arms, s.num_groups) <= t0 <= s.max_group_size

    def test_fraction_for_many_groups(self):
        # 21 copies of one 3-arm group: past the enumeration limit t0 = 3/21 comes from the LP
        s = GroupStructure.from_lists(3, [[0, 1, 2]] * 21)
        assert t0_fraction(s) == Fraction(3, 21)
        assert t_min(s, 7) == 1


class TestSchedule:
    def test_single_group(self):
        sched = burn_in_schedule(GroupStructure.from_lists(2, [[0, 1]]), 3)
        assert sched.length == 6
        assert sched.arm_counts(2).tolist() == [3, 3]

    def test_all_shared(self):
        sched = burn_in_schedule(all_shared(4, 8), 2)
        assert sched.length == 4
        assert sched.arm_counts(8).tolist() == [2] * 8

    def test_disjoint(self):
        s = disjoint([2, 3, 5])
        sched = burn_in_schedule(s, 1)
        assert sched.length == 5
        assert sorted(row[2] for row in sched.pulls) == [5, 6, 7, 8, 9]

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            burn_in_schedule(all_shared(1, 2), 0)

    @settings(max_examples=200, deadline=None)
    @given(structures(max_groups=7, max_arms=10))
    def test_contract(self, s):
        for n0 in (1, 3):
            sched = burn_in_schedule(s, n0)
            assert sched.length == math.ceil(n0 * t0_fraction(s))
            assert len(sched.pulls) == sched.length
            for row in sched.pulls:
                assert all(s.arm_sets[g] >> a & 1 for g, a in enumerate(row))
            assert sched.arm_counts(s.num_arms).min() >= n0
