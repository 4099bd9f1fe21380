import math
import random

import numpy as np
import pytest
from hypothesis import given, settings

from colucb import analysis as an
from colucb import oracles
from colucb.core import GroupStructure, all_shared, disjoint, gaussian_instance, k_subsets
from colucb.subsets import EnumerationCapError, SubsetTables, min_cover_sizes, touch_counts
from conftest import random_instance, structures

PAIR = GroupStructure.from_lists(2, [[0, 1]])


class TestSharing:
    def test_h1(self, chain):
        assert an.h1(all_shared(3, 4), 0b1111) == 3 / 4
        assert an.h1(disjoint([2, 3]), 0b11100) == 1 / 3
        assert an.h1(chain, 0b010) == 2

    def test_h2_minus(self):
        assert an.h2_minus(disjoint([2, 3]), 0b100) == 1
        assert an.h2_minus(all_shared(3, 5), 0b11111) == 1 / 5
        assert an.h2_minus(k_subsets(6, 3), 0b000111) == 1 / 3

    def test_h2_plus(self):
        assert an.h2_plus(PAIR, 0b11) == 1 / 2
        assert an.h2_plus(all_shared(3, 4), 0b1111) == 3 / 4
        assert an.h2_plus(disjoint([2, 3]), 0b01100) == 1 / 2

    def test_empty_subset(self, chain):
        with pytest.raises(ValueError):
            an.h1(chain, 0)

    def test_ht_bounds(self):
        # H1 = 1 and H2- = 1 on a singleton of one group; T = 4
        lo, hi = an.ht_bounds(PAIR, 0b01, 4)
        assert lo == 3 and hi == 3

    def test_disjoint_bounds_coincide(self):
        s = disjoint([2, 3, 2])
        for S in range(1, 1 << s.num_arms):
            lo, hi = an.ht_bounds(s, S, 100)
            assert lo == pytest.approx(hi)

    @settings(max_examples=80, deadline=None)
    @given(structures(max_groups=8, max_arms=8))
    def test_branch_and_bound_equals_enumeration(self, s):
        for S in range(1, 1 << s.num_arms):
            h1, m, p = oracles.h_enumeration(s, S)
            assert an.h2_minus(s, S) == m
            assert an.h2_plus(s, S) == p
            assert m <= p and m >= 1 / s.max_group_size and m <= h1

    @settings(max_examples=60, deadline=None)
    @given(structures(max_groups=8, max_arms=10))
    def test_tables_match_scalar(self, s):
        tab = SubsetTables(s)
        for S in range(1, 1 << s.num_arms):
            assert tab.touch[S] == an.touching(s, S)
            assert tab.min_cover[S] == an.min_cover(s, S)[0]

    def test_cover_witness(self):
        s = k_subsets(6, 3)
        k, groups = an.min_cover(s, 0b111111)
        assert k == 2 and s.cover(groups) == 0b111111
        count, groups = an.h2_plus_cover(s, 0b000111)
        assert count == 1 and s.cover(groups) & 0b111 == 0b111


class TestBarHt:
    def test_single_group(self):
        v, S = an.bar_ht(PAIR, 16, "-")
        assert v == pytest.approx(0.5 + 0.5 ** 1.5 * 4) and S == 0b11
        assert an.bar_ht(PAIR, 16, "+")[0] == pytest.approx(v)

    def test_all_shared_minimized_at_full_set(self):
        s = all_shared(4, 5)
        for sign in "+-":
            assert an.bar_ht(s, 100, sign)[1] == 0b11111

    @pytest.mark.parametrize("k,T", [(2, 64), (3, 100), (4, 1024)])
    def test_k_equals_arm_count(self, k, T):
        # one group holding every arm: the closed form is exact
        s = k_subsets(k, k)
        expected = (math.sqrt(T / k) + 1) / k
        for sign in "+-":
            assert an.bar_ht(s, T, sign)[0] == pytest.approx(expected, abs=1e-12)

    def test_k_subsets_8_4(self):
        # all 70 groups touch A; two disjoint 4-sets cover it
        s = k_subsets(8, 4)
        assert (an.h1(s, 0xFF), an.h2_minus(s, 0xFF)) == (70 / 8, 2 / 8)
        assert an.bar_ht(s, 1024, "-") == (pytest.approx(12.75), 0xFF)
        assert an.bar_ht(s, 1024, "+")[0] == pytest.approx(21.25)

    @settings(max_examples=25, deadline=None)
    @given(structures(max_groups=5, max_arms=6))
    def test_against_enumeration(self, s):
        for sign in "+-":
            assert an.bar_ht(s, 50, sign)[0] == pytest.approx(oracles.bar_ht_enumeration(s, 50, sign), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(structures(max_groups=6, max_arms=7))
    def test_envelope_order(self, s):
        lo, hi = an.theorem2_envelope(s, 1000)
        assert lo <= hi
        plus, minus = an.bar_ht(s, 1000, "+")[0], an.bar_ht(s, 1000, "-")[0]
        assert 1000 ** (2 / 3) / plus ** (1 / 3) <= 1000 ** (2 / 3) / minus ** (1 / 3) + 1e-9

    def test_cap(self):
        s = GroupStructure.from_lists(30, [list(range(30))])
        with pytest.raises(EnumerationCapError):
            an.bar_ht(s, 10)


class TestPhiAndImprovement:
    def test_eps_one(self, chain):
        tab = SubsetTables(chain)
        assert an.phi(chain, 1.0) == 0.5 * tab.h1()[1:].min()

    def test_pair_half(self):
        assert an.phi(PAIR, 0.5) == pytest.approx(0.5)

    def test_disjoint_improvement(self):
        s = disjoint([2, 4])
        assert SubsetTables(s).h1()[1:].min() == pytest.approx(1 / 4)
        assert not an.sufficient_improvement(s, 10_000, 1)

    def test_all_shared_improvement(self):
        # min H1 = |G|/|A| = 4 >= sqrt(100)/|A|^{3/2}
        assert an.sufficient_improvement(all_shared(8, 2), 100, 1)

    def test_trivial_horizon(self, chain):
        assert an.sufficient_improvement(chain, 1, 1)


class TestInstanceFunctionals:
    def test_contention_star(self):
        s = GroupStructure.from_lists(3, [[0, 1], [1, 2]])
        inst = gaussian_instance(s, [0.9, 0.85, 0.6])
        assert an.contention_star(inst, 0.05) == 0b011
        assert an.contention_star(inst, 0.01) == 0
        tied = gaussian_instance(PAIR, [0.4, 0.4])
        assert an.contention_star(tied, 0.01) == 0b11

    @pytest.mark.parametrize("G,A,eps", [(3, 5, 0.3), (2, 2, 0.01), (6, 4, 1.0)])
    def test_m_closed_form(self, G, A, eps):
        inst = gaussian_instance(all_shared(G, A), [0.5] * A)
        assert an.m_eps(inst, eps) == pytest.approx(oracles.shared_M(G, A, eps), rel=1e-9)

    def test_m_infinite(self):
        inst = gaussian_instance(PAIR, [0.9, 0.1])
        assert an.m_eps(inst, 0.5) == math.inf

    def test_m_at_one(self):
        # with means in [0, 1] every cost max(gap, 1) is 1, so M(1) = 1/t0
        rng = random.Random(3)
        from colucb.flow import compute_t0
        for _ in range(20):
            inst = random_instance(rng)
            assert an.m_eps(inst, 1.0) == pytest.approx(1 / compute_t0(inst.structure), rel=1e-9)

    def test_t_r_closed_forms(self):
        G, A = 3, 7
        F = an.Functionals(gaussian_instance(all_shared(G, A), [0.2] * A))
        for eps in (0.9, 0.3, 0.05, 0.004):
            assert F.T_of(eps) == pytest.approx(oracles.shared_T(G, A, eps), rel=1e-5)
            assert F.R_of(eps) == pytest.approx(oracles.shared_R(G, A, eps), rel=1e-5)

    def test_sigma_scaling(self):
        G, A = 2, 3
        F = an.Functionals(gaussian_instance(all_shared(G, A), [0.0] * A), sigma=0.5)
        assert F.T_of(0.2) == pytest.approx(oracles.shared_T(G, A, 0.2, 0.5), rel=1e-5)
        assert F.R_of(0.2) == pytest.approx(oracles.shared_R(G, A, 0.2, 0.5), rel=1e-5)

    def test_no_contention(self):
        F = an.Functionals(gaussian_instance(PAIR, [1.0, 0.0]))
        assert F.T_of(0.3) == 0 and F.R_of(0.3) == 0

    def test_edge_values(self):
        F = an.Functionals(gaussian_instance(PAIR, [0.5, 0.5]))
        assert F.T_of(1.0) == 0 and F.R_of(1.0) == 0
        with pytest.raises(ValueError):
            F.T_of(0.0)

    def test_eps_T_closed_form(self):
        G, A = 4, 6
        inst = gaussian_instance(all_shared(G, A), [0.3] * A)
        for T in (10.0, 1000.0, 1e5):
            e = an.eps_T(inst, None, T)
            assert e == pytest.approx(oracles.shared_eps_T(G, A, T), rel=1e-5)
            assert abs(an.Functionals(inst).T_of(e) - T) / T <= 1e-6

    def test_eps_T_small_target(self):
        inst = gaussian_instance(all_shared(2, 2), [0.3, 0.3])
        assert an.eps_T(inst, None, 1e-9) > 0.999

    def test_eps_T_plateau(self):
        # contention vanishes below the gap 0.5, so T cannot exceed its value there
        inst = gaussian_instance(PAIR, [1.0, 0.5])
        assert an.eps_T(inst, None, 1e9) == pytest.approx(0.5)

    def test_eps_star(self):
        G, A = 3, 5
        inst = gaussian_instance(all_shared(G, A), [0.3] * A)
        prev = 1.0
        for T in (10, 100, 10_000, 10**6):
            e = an.eps_star(inst, T)
            assert e == pytest.approx(oracles.shared_eps_star(G, A, T), rel=1e-6)
            assert e <= prev
            prev = e

    def test_eps_star_skips_infinite(self):
        inst = gaussian_instance(PAIR, [0.8, 0.5])
        e = an.eps_star(inst, 1000)
        assert e >= 0.3 - 1e-12 and an.m_eps(inst, e) * e ** 3 * 1000 >= 1

    def test_condition(self):
        inst = gaussian_instance(all_shared(3, 4), [0.5] * 4)
        assert an.condition_check(inst, 1.0, 1.0)
        assert not an.condition_check(inst, 1.0, 1.5)
        jump = gaussian_instance(PAIR, [0.5, 0.4])
        assert not an.condition_check(jump, 10.0, 2.0)

    def test_condition_validation(self):
        inst = gaussian_instance(PAIR, [0.5, 0.4])
        with pytest.raises(ValueError):
            an.condition_check(inst, 0.5, 1)
        with pytest.raises(ValueError):
            an.condition_check(inst, 1, 3)

    def test_r_t_max_estimate(self):
        fam = [gaussian_instance(all_shared(G, 3), [0.5] * 3) for G in (1, 2, 4)]
        v, k = an.r_t_max_estimate(fam, 100)
        assert k == 0 and v > 0


class TestInequalities:
    """M <= |G|/eps, M >= phi, T >= R >= eps T, monotonicity, on random instances."""

    @pytest.fixture
    def instances(self):
        rng = random.Random(42)
        return [random_instance(rng, max_groups=5, max_arms=6) for _ in range(12)]

    def test_all(self, instances):
        grid = np.geomspace(0.01, 1.0, 12)
        for inst in instances:
            F = an.Functionals(inst)
            tab = SubsetTables(inst.structure)
            ms = [F.M(e) for e in grid]
            ts = [F.T_of(e) for e in grid]
            rs = [F.R_of(e) for e in grid]
            for e, m, t, r in zip(grid, ms, ts, rs):
                if math.isfinite(m):
                    assert m <= inst.num_groups / e * (1 + 1e-7)
                assert m >= an.phi(inst.structure, e, tables=tab) * (1 - 1e-7)
                assert t * (1 + 1e-7) >= r >= e * t * (1 - 1e-7)
            for i in range(len(grid) - 1):
                assert ms[i] >= ms[i + 1] * (1 - 1e-7)
                assert ts[i] >= ts[i + 1] * (1 - 1e-7)
                assert rs[i] >= rs[i + 1] * (1 - 1e-7)


def test_cover_sweep_300_structures():
    from colucb.selftest import random_structure
    rng = random.Random(2024)
    for _ in range(300):
        s = random_structure(rng, max_groups=6, max_arms=7)
        for S in range(1, 1 << s.num_arms):
            _, m, p = oracles.h_enumeration(s, S)
            assert (an.h2_minus(s, S), an.h2_plus(s, S)) == (m, p)


@settings(max_examples=40, deadline=None)
@given(structures(max_groups=6, max_arms=7))
def test_vectorized_cover_oracle(s):
    cm, cp = oracles.cover_enumeration_all(s)
    for S in range(1, 1 << s.num_arms):
        assert (cm[S], cp[S]) == oracles.cover_enumeration(s, S)
