"""Col-UCB and the independent/pooled UCB baselines for grouped bandits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .core import AlgoConfig, GroupStructure, Instance, mask_of
from .flow import BurninSchedule, burn_in_schedule
from .lp import GE, LE, LpProblem, LpSolution, solve_lp

POLICIES = ("ColUCB", "IndependentUCB", "PooledUCB")


@dataclass(eq=False)
class ColUcbState:
    structure: GroupStructure
    config: AlgoConfig
    burnin: BurninSchedule
    member: np.ndarray  # (G, A) bool
    round: int = 0
    pull_count: np.ndarray = None
    reward_sum: np.ndarray = None
    mean_est: np.ndarray = None
    gap_est: np.ndarray = None  # (G, A), NaN outside A_g
    ucb: np.ndarray = None
    lcb: np.ndarray = None
    candidate: np.ndarray = None  # (G, A) bool
    cumulative_contention: np.ndarray = None  # (G, A) bool
    contention: np.ndarray = None  # (A,) bool
    p_min: int = 0
    eps_t: float = math.inf
    allocation: np.ndarray = None  # (G, A)
    q_value: float = math.nan
    lp_problem: Optional[LpProblem] = None
    lp_solution: Optional[LpSolution] = None
    lp_vars: list = field(default_factory=list)

    @property
    def candidate_sets(self) -> list[int]:
        return [mask_of(np.flatnonzero(row)) for row in self.candidate]

    @property
    def contention_mask(self) -> int:
        return mask_of(np.flatnonzero(self.contention))

    @property
    def in_burnin(self) -> bool:
        return self.round < self.burnin.length


def init_state(structure: GroupStructure, config: AlgoConfig, burnin: BurninSchedule | None = None) -> ColUcbState:
    if burnin is None:
        burnin = burn_in_schedule(structure, config.burnin_pulls)
    G, n = structure.num_groups, structure.num_arms
    member = structure.membership()
    return ColUcbState(
        structure=structure,
        config=config,
        burnin=burnin,
        member=member,
        pull_count=np.zeros(n, dtype=np.int64),
        reward_sum=np.zeros(n),
        mean_est=np.full(n, np.nan),
        gap_est=np.full((G, n), np.nan),
        ucb=np.full(n, np.inf),
        lcb=np.full(n, -np.inf),
        candidate=member.copy(),
        cumulative_contention=member.copy(),
        contention=np.ones(n, dtype=bool),
        allocation=np.zeros((G, n)),
    )


def refresh_stats(state: ColUcbState) -> None:
    """Recompute means, confidence bounds and gap estimates from pooled statistics."""
    cnt = state.pull_count
    pulled = cnt > 0
    mean = np.full(cnt.shape, np.nan)
    mean[pulled] = state.reward_sum[pulled] / cnt[pulled]
    width = np.full(cnt.shape, np.inf)
    width[pulled] = np.sqrt(state.config.radius_numerator / cnt[pulled])
    state.mean_est = mean
    state.ucb = np.where(pulled, mean + width, np.inf)
    state.lcb = np.where(pulled, mean - width, -np.inf)
    masked = np.where(state.member, mean[None, :], -np.inf)
    best = masked.max(axis=1, keepdims=True)
    state.gap_est = np.where(state.member, best - mean[None, :], np.nan)


def candidate_set(state: ColUcbState, g: int) -> int:
    """Arms of ``g`` whose UCB reaches the group's largest LCB (ties kept)."""
    row = state.member[g]
    max_lcb = state.lcb[row].max()
    return mask_of(np.flatnonzero(row & (state.ucb >= max_lcb)))


def _candidates(state: ColUcbState) -> np.ndarray:
    max_lcb = np.where(state.member, state.lcb[None, :], -np.inf).max(axis=1, keepdims=True)
    return state.member & (state.ucb[None, :] >= max_lcb)


def update_contention(state: ColUcbState) -> ColUcbState:
    """Intersect each group's running contention with this round's ``C_g`` and take the union."""
    cand = state.candidate
    sizes = cand.sum(axis=1)
    cg = cand & (sizes > 1)[:, None]
    state.cumulative_contention &= cg
    state.contention = state.cumulative_contention.any(axis=0)
    _refresh_radius(state)
    return state


def _refresh_radius(state: ColUcbState) -> None:
    if state.contention.any():
        state.p_min = int(state.pull_count[state.contention].min())
        state.eps_t = math.sqrt(state.config.radius_numerator / state.p_min) if state.p_min > 0 else math.inf
    else:
        state.p_min = 0
        state.eps_t = math.nan


def build_Q(state: ColUcbState) -> LpProblem:
    """Exploration allocation program over contention arms; last variable is ``q``."""
    if not state.contention.any():
        raise ValueError("build_Q needs a nonempty contention set")
    avail = state.member & state.contention[None, :]
    gs, as_ = np.nonzero(avail)
    nv = len(gs) + 1
    groups = np.unique(gs)
    arms = np.flatnonzero(state.contention)
    use_budget = state.p_min > 0
    rows = (2 if use_budget else 1) * len(groups) + len(arms)
    A = np.zeros((rows, nv))
    b = np.zeros(rows)
    senses = []
    r = 0
    var_idx = np.arange(len(gs))
    if use_budget:
        for g in groups:
            sel = var_idx[gs == g]
            A[r, sel] = state.gap_est[g, as_[sel]]
            b[r] = state.eps_t
            senses.append(LE)
            r += 1
    for g in groups:
        A[r, var_idx[gs == g]] = 1.0
        b[r] = 1.0
        senses.append(LE)
        r += 1
    for a in arms:
        A[r, var_idx[as_ == a]] = 1.0
        A[r, -1] = -1.0
        senses.append(GE)
        r += 1
    c = np.zeros(nv)
    c[-1] = 1.0
    state.lp_vars = list(zip(gs.tolist(), as_.tolist()))
    return LpProblem(c, A, tuple(senses), b)


def _default_arms(state: ColUcbState) -> np.ndarray:
    score = state.mean_est if state.config.default_arm == "empirical_best" else state.ucb
    return np.argmax(np.where(state.member, score[None, :], -np.inf), axis=1)


def draw_rewards(instance: Instance, arms: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized :func:`sample_reward`: one ``rng.random()`` double per pulled arm, in order."""
    u = rng.random(len(arms))
    bern, mean, sd = instance.reward_arrays
    m = mean[arms]
    gauss = m + sd[arms] * ndtri(np.where(u > 0.0, u, 2.0**-54))
    return np.where(bern[arms], (u < m).astype(float), gauss)


def _pool(state_counts, state_sums, arms, rewards):
    np.add.at(state_counts, arms, 1)
    np.add.at(state_sums, arms, rewards)


def choose_actions(state: ColUcbState, policy_rng: np.random.Generator) -> np.ndarray:
    """Pick one arm per group for the current round and update the allocation fields.

    Expects estimates already refreshed from the current pull counts (``step`` does this).
    """
    G = state.structure.num_groups
    if state.in_burnin:
        state.allocation = np.zeros_like(state.allocation)
        state.q_value = math.nan
        state.lp_problem = state.lp_solution = None
        return np.asarray(state.burnin.pulls[state.round], dtype=np.int64)

    state.candidate = _candidates(state)
    update_contention(state)
    u = policy_rng.random(G)
    default = _default_arms(state)
    alloc = np.zeros_like(state.allocation)
    if state.contention.any():
        prob = build_Q(state)
        sol = solve_lp(prob)
        if not sol.optimal:
            raise RuntimeError(f"allocation program returned {sol.status}")
        gs, as_ = np.array(state.lp_vars).T
        alloc[gs, as_] = sol.primal[:-1]
        state.q_value = float(sol.primal[-1])
        state.lp_problem, state.lp_solution = prob, sol
    else:
        state.q_value = math.nan
        state.lp_problem = state.lp_solution = None
    state.allocation = alloc
    # first arm (ascending) whose cumulative allocation exceeds the group's uniform
    hit = (u[:, None] < np.cumsum(alloc, axis=1)) & (alloc > 0)
    return np.where(hit.any(axis=1), hit.argmax(axis=1), default)


def step(state: ColUcbState, instance: Instance, env_rng: np.random.Generator,
         policy_rng: np.random.Generator):
    if state.round >= state.config.horizon:
        raise RuntimeError("round overflow: horizon already reached")
    actions = choose_actions(state, policy_rng)
    rewards = draw_rewards(instance, actions, env_rng)
    _pool(state.pull_count, state.reward_sum, actions, rewards)
    # keep estimates current between rounds; contention fields describe the round just played
    refresh_stats(state)
    state.round += 1
    return state, actions, rewards


class _UcbBaseline:
    """Per-group UCB over private (independent) or shared (pooled) statistics."""

    def __init__(self, structure: GroupStructure, config: AlgoConfig, pooled: bool):
        self.structure = structure
        self.config = config
        self.pooled = pooled
        self.member = structure.membership()
        G, n = self.member.shape
        shape = (n,) if pooled else (G, n)
        self.counts = np.zeros(shape, dtype=np.int64)
        self.sums = np.zeros(shape)
        self.round = 0

    def indices(self) -> np.ndarray:
        cnt = np.broadcast_to(self.counts, self.member.shape)
        sums = np.broadcast_to(self.sums, self.member.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            idx = sums / cnt + np.sqrt(self.config.radius_numerator / cnt)
        idx = np.where(cnt > 0, idx, np.inf)
        return np.where(self.member, idx, -np.inf)

    def choose(self) -> np.ndarray:
        return np.argmax(self.indices(), axis=1)

    def update(self, actions, rewards):
        if self.pooled:
            _pool(self.counts, self.sums, actions, rewards)
        else:
            g = np.arange(len(actions))
            self.counts[g, actions] += 1
            self.sums[g, actions] += rewards
        self.round += 1


def independent_ucb_step(baseline: _UcbBaseline, instance: Instance, env_rng: np.random.Generator):
    actions = baseline.choose()
    rewards = draw_rewards(instance, actions, env_rng)
    baseline.update(actions, rewards)
    return actions, rewards


pooled_ucb_step = independent_ucb_step


def make_baseline(policy: str, structure: GroupStructure, config: AlgoConfig) -> _UcbBaseline:
    if policy == "IndependentUCB":
        return _UcbBaseline(structure, config, pooled=False)
    if policy == "PooledUCB":
        return _UcbBaseline(structure, config, pooled=True)
    raise ValueError(f"not a UCB baseline: {policy!r}")


@dataclass(eq=False)
class Trajectory:
    policy: str
    actions: np.ndarray  # (T, G)
    pseudo_regret: np.ndarray  # (T, G) per-round increments
    contention_size: np.ndarray  # (T,)
    q_value: np.ndarray
    eps_t: np.ndarray
    epoch: np.ndarray
    t_min: int = 0

    @property
    def horizon(self) -> int:
        return len(self.actions)

    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.pseudo_regret, axis=0)

    def group_regret(self) -> np.ndarray:
        return self.pseudo_regret.sum(axis=0)

    def collaborative_regret(self) -> float:
        return float(self.group_regret().max())

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,group,action,regret_increment,contention_size,q_value,eps_t\n")
            for t in range(self.horizon):
                for g in range(self.actions.shape[1]):
                    fh.write(
                        f"{t},{g},{self.actions[t, g]},{self.pseudo_regret[t, g]:.17g},"
                        f"{self.contention_size[t]},{self.q_value[t]:.17g},{self.eps_t[t]:.17g}\n"
                    )


def epoch_index(eps: float) -> int:
    """Epoch ``k`` with ``eps`` in ``(2^-(k+2), 2^-(k+1)]``; epoch 0 also absorbs ``eps > 1/2``.

    Returns -1 when ``eps`` is undefined (no contention).
    """
    if not math.isfinite(eps):
        return 0 if eps == math.inf else -1
    if eps <= 0:
        raise ValueError("eps must be positive")
    return max(0, math.floor(-math.log2(eps)) - 1)


def default_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Environment and policy generators for a bare integer seed."""
    env = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0, 0, 0])))
    pol = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0, 0, 1])))
    return env, pol


Observer = Callable[[object, int, np.ndarray, np.ndarray], None]


def run(policy: str, instance: Instance, config: AlgoConfig, seed: int = 0, *,
        env_rng: np.random.Generator | None = None, policy_rng: np.random.Generator | None = None,
        observer: Observer | None = None, burnin: BurninSchedule | None = None,
        max_rounds: int | None = None) -> Trajectory:
    """Play ``config.horizon`` rounds of ``policy`` on ``instance``.

    ``observer(state, t, actions, rewards)`` is called after every round with
    the policy's internal state (a :class:`ColUcbState` for Col-UCB).
    ``max_rounds`` stops early; the confidence widths still use ``config.horizon``.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; choose from {POLICIES}")
    d_env, d_pol = default_streams(seed)
    env_rng = env_rng or d_env
    policy_rng = policy_rng or d_pol
    structure = instance.structure
    T, G = config.horizon, structure.num_groups
    if max_rounds is not None:
        T = max(0, min(T, int(max_rounds)))
    actions = np.zeros((T, G), dtype=np.int64)
    csize = np.zeros(T, dtype=np.int64)
    qv = np.full(T, np.nan)
    eps = np.full(T, np.nan)
    epoch = np.full(T, -1, dtype=np.int64)
    gaps = np.nan_to_num(instance.gap)

    if policy == "ColUCB":
        state = init_state(structure, config, burnin)
        t_min = state.burnin.length
        for t in range(T):
            _, act, rew = step(state, instance, env_rng, policy_rng)
            actions[t] = act
            if t < t_min:
                csize[t] = structure.num_arms
                # contention is the whole arm set during burn-in; report the radius
                # from pulls before this round
                pm = int((state.pull_count - np.bincount(act, minlength=structure.num_arms)).min())
                eps[t] = math.sqrt(config.radius_numerator / pm) if pm > 0 else math.inf
            else:
                csize[t] = int(state.contention.sum())
                qv[t] = state.q_value
                eps[t] = state.eps_t
            epoch[t] = epoch_index(eps[t])
            if observer is not None:
                observer(state, t, act, rew)
    else:
        t_min = 0
        base = make_baseline(policy, structure, config)
        for t in range(T):
            act, rew = independent_ucb_step(base, instance, env_rng)
            actions[t] = act
            if observer is not None:
                observer(base, t, act, rew)
    regret = gaps[np.arange(G)[None, :], actions]
    return Trajectory(policy, actions, regret, csize, qv, eps, epoch, t_min)
