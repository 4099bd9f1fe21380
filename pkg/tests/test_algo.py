import math

import numpy as np
import pytest

from colucb.algo import (ColUcbState, build_Q, candidate_set, choose_actions, draw_rewards, epoch_index, init_state,
                         make_baseline, refresh_stats, run, step, update_contention)
from colucb.core import (AlgoConfig, GroupStructure, RewardModel, all_shared, bernoulli_instance, build_instance,
                         disjoint, gaussian_instance, mask_of, sample_reward)
from colucb.lp import max_violation, solve_lp

PAIR = GroupStructure.from_lists(2, [[0, 1]])


def config(structure, T=2000, scale=0.01, **kw):
    return AlgoConfig.for_structure(structure, T, scale, **kw)


def seeded_state(structure, counts, sums, cfg=None):
    st = init_state(structure, cfg or config(structure))
    st.pull_count[:] = counts
    st.reward_sum[:] = sums
    st.round = st.burnin.length
    refresh_stats(st)
    return st


class TestInitState:
    def test_zeroed(self, chain):
        st = init_state(chain, config(chain))
        assert st.round == 0 and st.pull_count.sum() == 0
        assert st.contention_mask == 0b111

    def test_burnin_lengths(self):
        s = all_shared(4, 8)
        assert init_state(s, AlgoConfig(100, 1.0, 1.0, 2)).burnin.length == 4
        assert init_state(PAIR, AlgoConfig(100, 1.0, 1.0, 3)).burnin.length == 6


class TestCandidateSet:
    def test_equal_stats_keep_everything(self):
        st = seeded_state(all_shared(1, 3), [10, 10, 10], [5, 5, 5])
        assert candidate_set(st, 0) == 0b111

    def test_separated(self):
        cfg = AlgoConfig(100, 1.0, 0.01, 1)
        st = seeded_state(PAIR, [1000, 1000], [1000.0, 0.0], cfg)
        assert st.ucb[0] - st.mean_est[0] < 0.5
        assert candidate_set(st, 0) == 0b01

    def test_boundary_is_inclusive(self):
        # width w = sqrt(C log T / n); choose means 2w apart so UCB_1 == LCB_0 exactly
        cfg = AlgoConfig(math.e ** 4, 1.0, 0.25, 1)  # C log T = 1
        st = seeded_state(PAIR, [4, 4], [4.0, 0.0], cfg)  # w = 1/2, means 1 and 0
        assert st.ucb[1] == st.lcb[0]
        assert candidate_set(st, 0) == 0b11


class TestContention:
    def _state(self, n=4, G=1):
        st = init_state(all_shared(G, n), config(all_shared(G, n)))
        st.pull_count[:] = 5
        return st

    def test_singletons_empty_everything(self):
        st = self._state(G=2)
        st.candidate = np.array([[1, 0, 0, 0], [0, 0, 1, 0]], dtype=bool)
        update_contention(st)
        assert st.contention_mask == 0 and math.isnan(st.eps_t)

    def test_running_intersection(self):
        st = self._state()
        st.candidate = np.array([[1, 1, 1, 0]], dtype=bool)
        update_contention(st)
        st.candidate = np.array([[0, 1, 1, 1]], dtype=bool)
        update_contention(st)
        assert mask_of(np.flatnonzero(st.cumulative_contention[0])) == 0b0110

    def test_union(self):
        st = self._state(G=2)
        st.cumulative_contention = np.array([[0, 1, 1, 0], [0, 0, 1, 1]], dtype=bool)
        st.candidate = np.ones((2, 4), dtype=bool)
        update_contention(st)
        assert st.contention_mask == 0b1110

    def test_empty_stays_empty(self):
        st = self._state()
        st.candidate = np.array([[1, 0, 0, 0]], dtype=bool)
        update_contention(st)
        st.candidate = np.ones((1, 4), dtype=bool)
        update_contention(st)
        assert st.contention_mask == 0


def _q_value(state):
    return solve_lp(build_Q(state)).value


class TestBuildQ:
    def _state(self, structure, contention, gap=0.0, p_min=10, eps=0.1):
        st = init_state(structure, config(structure))
        st.contention = np.zeros(structure.num_arms, dtype=bool)
        st.contention[contention] = True
        st.gap_est = np.where(structure.membership(), gap, np.nan)
        st.p_min, st.eps_t = p_min, eps
        return st

    def test_one_group_splits_mass(self):
        assert _q_value(self._state(PAIR, [0, 1])) == pytest.approx(0.5)

    def test_shared_single_arm(self):
        s = all_shared(5, 3)
        assert _q_value(self._state(s, [1])) == pytest.approx(5)

    def test_budget_binds(self):
        assert _q_value(self._state(PAIR, [1], gap=0.2, eps=0.1)) == pytest.approx(0.5)

    def test_budget_dropped_without_pulls(self):
        assert _q_value(self._state(PAIR, [1], gap=0.2, eps=0.1, p_min=0)) == pytest.approx(1.0)

    def test_empty_contention(self):
        with pytest.raises(ValueError):
            build_Q(self._state(PAIR, []))


class TestStep:
    def test_empty_contention_plays_empirical_best(self):
        s = all_shared(1, 4)
        inst = gaussian_instance(s, [0, 0, 0, 1])
        st = seeded_state(s, [50] * 4, [0, 0, 0, 50.0])
        st.cumulative_contention[:] = False
        rng = np.random.default_rng(0)
        for _ in range(20):
            _, act, _ = step(st, inst, rng, rng)
            assert act[0] == 3

    def test_ucb_default_arm(self):
        s = all_shared(1, 2)
        cfg = config(s, default_arm="ucb_best")
        st = seeded_state(s, [1000, 2], [500.0, 0.9], cfg)
        st.cumulative_contention[:] = False
        act = choose_actions(st, np.random.default_rng(0))
        # arm 1 has a lower mean but a much wider confidence interval
        assert st.ucb[1] > st.ucb[0] and act[0] == 1

    def test_sampling_frequencies(self):
        # 2 groups share 2 arms with no estimated gaps: allocation puts mass 1 on each arm
        s = all_shared(2, 2)
        inst = gaussian_instance(s, [0.5, 0.5])
        st = seeded_state(s, [10**6] * 2, [5 * 10**5] * 2)
        rng = np.random.default_rng(1)
        counts = np.zeros((2, 2))
        n = 10_000
        for _ in range(n):
            act = choose_actions(st, rng)
            counts[[0, 1], act] += 1
        for g in range(2):
            x = st.allocation[g]
            p = x / x.sum()
            sd = np.sqrt(n * p * (1 - p))
            assert np.all(np.abs(counts[g] - n * p) <= 3 * sd + 1e-9)

    def test_round_overflow(self):
        s = PAIR
        cfg = AlgoConfig(2, 1.0, 1.0, 1)
        inst = gaussian_instance(s, [0, 1])
        st = init_state(s, cfg)
        rng = np.random.default_rng(0)
        step(st, inst, rng, rng)
        step(st, inst, rng, rng)
        with pytest.raises(RuntimeError, match="overflow"):
            step(st, inst, rng, rng)

    def test_vectorized_rewards_match_scalar_sampler(self):
        s = GroupStructure.from_lists(3, [[0, 1, 2]])
        inst = build_instance(s, [RewardModel.gaussian(0.2, 2.0), RewardModel.bernoulli(0.3), RewardModel.gaussian(-1)])
        arms = np.array([0, 1, 2, 2, 1, 0])
        a, b = np.random.default_rng(4), np.random.default_rng(4)
        vec = draw_rewards(inst, arms, a)
        ref = [sample_reward(inst.rewards[k], b) for k in arms]
        assert vec.tolist() == ref


class TestRun:
    @pytest.mark.parametrize("policy", ["ColUCB", "IndependentUCB", "PooledUCB"])
    def test_equal_means_zero_regret(self, policy, chain):
        inst = gaussian_instance(chain, [0.3, 0.3, 0.3])
        assert run(policy, inst, config(chain, 500), seed=3).pseudo_regret.sum() == 0

    @pytest.mark.parametrize("policy", ["ColUCB", "IndependentUCB", "PooledUCB"])
    def test_deterministic(self, policy, chain):
        inst = gaussian_instance(chain, [0.9, 0.6, 0.7])
        a, b = run(policy, inst, config(chain, 800), seed=5), run(policy, inst, config(chain, 800), seed=5)
        assert np.array_equal(a.actions, b.actions)

    def test_regret_accounting(self, chain):
        inst = gaussian_instance(chain, [0.9, 0.6, 0.7])
        tr = run("ColUCB", inst, config(chain, 1500), seed=2)
        for g in range(2):
            manual = sum(inst.gap[g, a] for a in tr.actions[:, g])
            assert tr.group_regret()[g] == pytest.approx(manual, abs=1e-9)
        assert np.all(np.diff(tr.cumulative_regret(), axis=0) >= 0)

    def test_invariants_each_round(self, chain):
        inst = gaussian_instance(chain, [0.9, 0.85, 0.7])
        cfg = config(chain, 3000)
        seen = {"prev": None, "lp_rounds": 0}

        def check(state: ColUcbState, t, act, rew):
            cur = state.contention.copy()
            if seen["prev"] is not None:
                assert not (cur & ~seen["prev"]).any()
            seen["prev"] = cur
            pulled = state.pull_count > 0
            np.testing.assert_allclose(state.mean_est[pulled], (state.reward_sum / np.maximum(state.pull_count, 1))[pulled])
            if t + 1 == state.burnin.length:
                assert state.pull_count.min() >= cfg.burnin_pulls
            if state.lp_problem is not None:
                seen["lp_rounds"] += 1
                x = state.lp_solution.primal
                assert max_violation(state.lp_problem, x) <= 1e-9
                assert np.all(state.allocation.sum(axis=1) <= 1 + 1e-9)
                w = state.ucb[pulled] - state.mean_est[pulled]
                np.testing.assert_allclose(w, state.mean_est[pulled] - state.lcb[pulled])

        run("ColUCB", inst, cfg, seed=0, observer=check)
        assert seen["lp_rounds"] > 0

    def test_single_group_sublinear(self):
        inst = gaussian_instance(PAIR, [0.5, 0.0])
        T = 5000
        regs = [run("ColUCB", inst, config(PAIR, T), seed=s).collaborative_regret() for s in range(50)]
        assert np.mean(regs) <= 0.25 * T

    def test_baselines_agree_on_single_group(self):
        inst = gaussian_instance(GroupStructure.from_lists(3, [[0, 1, 2]]), [0.5, 0.4, 0.2])
        cfg = config(inst.structure, 1000)
        a = run("IndependentUCB", inst, cfg, seed=9)
        b = run("PooledUCB", inst, cfg, seed=9)
        assert np.array_equal(a.actions, b.actions)

    def test_baselines_agree_on_disjoint_groups(self):
        inst = gaussian_instance(disjoint([2, 3]), [0.5, 0.2, 0.1, 0.4, 0.3])
        cfg = config(inst.structure, 1000)
        assert np.array_equal(run("IndependentUCB", inst, cfg, seed=1).actions,
                              run("PooledUCB", inst, cfg, seed=1).actions)

    def test_ucb_log_pulls(self):
        inst = bernoulli_instance(PAIR, [1.0, 0.0])
        cfg = config(PAIR, 2000, scale=0.05)
        for policy in ("IndependentUCB", "PooledUCB"):
            tr = run(policy, inst, cfg, seed=0)
            bad = int((tr.actions[:, 0] == 1).sum())
            assert bad <= 4 * cfg.radius_numerator + 1

    def test_csv_export(self, chain, tmp_path):
        inst = gaussian_instance(chain, [0.9, 0.6, 0.7])
        tr = run("ColUCB", inst, config(chain, 300), seed=0)
        path = tmp_path / "traj.csv"
        tr.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,group,action,regret_increment,contention_size,q_value,eps_t"
        assert len(lines) == 1 + 300 * 2

    def test_unknown_policy(self, chain):
        with pytest.raises(ValueError):
            run("Thompson", gaussian_instance(chain, [0, 0, 0]), config(chain))

    def test_max_rounds(self, chain):
        tr = run("ColUCB", gaussian_instance(chain, [0.9, 0.6, 0.7]), config(chain, 1000), max_rounds=37)
        assert tr.horizon == 37


class TestEpochIndex:
    @pytest.mark.parametrize("eps,k", [(1.0, 0), (0.5, 0), (0.3, 0), (0.25, 1), (0.2, 1), (0.125, 2), (0.01, 5)])
    def test_values(self, eps, k):
        assert epoch_index(eps) == k

    def test_undefined(self):
        assert epoch_index(math.nan) == -1 and epoch_index(math.inf) == 0
