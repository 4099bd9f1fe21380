"""Grouped bandit domain types: set systems, reward models and instances."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtri

MAX_ARMS = 64
# Exhaustive subset enumeration above this many arms needs an explicit override.
ENUMERATION_CAP = 24


class StructureError(ValueError):
    pass


class ModelError(ValueError):
    pass


def mask_of(arms: Iterable[int]) -> int:
    m = 0
    for a in arms:
        m |= 1 << int(a)
    return m


def members(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True)
class GroupStructure:
    """The set system ``{A_g}``: one arm bitset per group over ``num_arms`` arms.

    Arms are capped at 64 so an arm set fits a machine word. The number of
    groups is not capped; group subsets are Python integers.
    """

    num_arms: int
    arm_sets: tuple[int, ...]

    def __post_init__(self):
        n = self.num_arms
        if not 1 <= n <= MAX_ARMS:
            raise StructureError(f"num_arms must be in [1, {MAX_ARMS}], got {n}")
        if len(self.arm_sets) < 1:
            raise StructureError("at least one group is required")
        full = (1 << n) - 1
        union = 0
        for g, m in enumerate(self.arm_sets):
            if m & ~full:
                raise StructureError(f"group {g} references arms outside 0..{n - 1}")
            if popcount(m) < 2:
                raise StructureError(f"group {g} must have at least two arms")
            union |= m
        if union != full:
            missing = members(full & ~union)
            raise StructureError(f"arms {missing} belong to no group")

    @classmethod
    def from_lists(cls, num_arms: int, groups: Sequence[Iterable[int]]) -> "GroupStructure":
        return cls(int(num_arms), tuple(mask_of(g) for g in groups))

    @property
    def num_groups(self) -> int:
        return len(self.arm_sets)

    @property
    def full_mask(self) -> int:
        return (1 << self.num_arms) - 1

    def arms_of(self, g: int) -> list[int]:
        return members(self.arm_sets[g])

    def groups_of(self, a: int) -> list[int]:
        bit = 1 << a
        return [g for g, m in enumerate(self.arm_sets) if m & bit]

    def cover(self, group_mask: int) -> int:
        """Union of arm sets over the groups in ``group_mask``."""
        u = 0
        g = 0
        while group_mask:
            if group_mask & 1:
                u |= self.arm_sets[g]
            group_mask >>= 1
            g += 1
        return u

    @property
    def max_group_size(self) -> int:
        return max(popcount(m) for m in self.arm_sets)

    def membership(self) -> np.ndarray:
        """Boolean ``(num_groups, num_arms)`` incidence matrix."""
        out = np.zeros((self.num_groups, self.num_arms), dtype=bool)
        for g, m in enumerate(self.arm_sets):
            out[g, members(m)] = True
        return out

    def as_lists(self) -> list[list[int]]:
        return [members(m) for m in self.arm_sets]


def all_shared(num_groups: int, num_arms: int) -> GroupStructure:
    return GroupStructure.from_lists(num_arms, [range(num_arms)] * num_groups)


def disjoint(sizes: Sequence[int]) -> GroupStructure:
    groups, start = [], 0
    for s in sizes:
        groups.append(range(start, start + s))
        start += s
    return GroupStructure.from_lists(start, groups)


def k_subsets(num_arms: int, k: int) -> GroupStructure:
    from itertools import combinations

    return GroupStructure.from_lists(num_arms, list(combinations(range(num_arms), k)))


@dataclass(frozen=True)
class RewardModel:
    """Gaussian(mean, variance) or Bernoulli(mean) reward distribution."""

    kind: str
    mean: float
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "bernoulli"):
            raise ModelError(f"unknown reward kind {self.kind!r}")
        if not math.isfinite(self.mean):
            raise ModelError("mean must be finite")
        if self.kind == "gaussian":
            if not (self.variance > 0 and math.isfinite(self.variance)):
                raise ModelError("Gaussian variance must be positive")
        elif not 0.0 <= self.mean <= 1.0:
            raise ModelError(f"Bernoulli mean must lie in [0, 1], got {self.mean}")

    @classmethod
    def gaussian(cls, mean: float, variance: float = 1.0) -> "RewardModel":
        return cls("gaussian", float(mean), float(variance))

    @classmethod
    def bernoulli(cls, mean: float) -> "RewardModel":
        return cls("bernoulli", float(mean), 0.0)

    @property
    def subgaussian(self) -> float:
        return self.variance if self.kind == "gaussian" else 1.0


def _uniform_open(u):
    # rng.random() lives on [0, 1); 0 would map to -inf under the inverse CDF.
    return np.where(u > 0.0, u, 2.0**-54)


def sample_reward(model: RewardModel, rng: np.random.Generator) -> float:
    """Draw one reward. Consumes exactly one ``rng.random()`` double per call.

    Gaussian rewards use the inverse normal CDF of that uniform, Bernoulli
    rewards compare it with the mean.
    """
    u = rng.random()
    if model.kind == "bernoulli":
        return 1.0 if u < model.mean else 0.0
    return model.mean + math.sqrt(model.variance) * float(ndtri(_uniform_open(u)))


@dataclass(frozen=True, eq=False)
class Instance:
    structure: GroupStructure
    rewards: tuple[RewardModel, ...]
    mu: np.ndarray = field(repr=False)
    mu_star: np.ndarray = field(repr=False)
    gap: np.ndarray = field(repr=False)  # (G, A), NaN outside A_g
    gap_min: np.ndarray = field(repr=False)
    gap_max: float = 0.0
    sigma: float = 1.0

    @property
    def num_arms(self) -> int:
        return self.structure.num_arms

    @property
    def num_groups(self) -> int:
        return self.structure.num_groups

    def best_arm(self, g: int) -> int:
        arms = self.structure.arms_of(g)
        return arms[int(np.argmax(self.mu[arms]))]

    def gap_values(self) -> np.ndarray:
        """Sorted distinct finite gap values over all (group, feasible arm) pairs."""
        vals = self.gap[np.isfinite(self.gap)]
        return np.unique(vals)

    def with_means(self, means: Sequence[float]) -> "Instance":
        new = []
        for r, m in zip(self.rewards, means):
            new.append(RewardModel(r.kind, float(m), r.variance))
        return build_instance(self.structure, new)

    @cached_property
    def reward_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-arm ``(is_bernoulli, mean, standard deviation)`` for vectorized sampling."""
        bern = np.array([r.kind == "bernoulli" for r in self.rewards])
        sd = np.array([math.sqrt(r.variance) if r.kind == "gaussian" else 0.0 for r in self.rewards])
        return bern, self.mu, sd

    @property
    def is_bernoulli(self) -> bool:
        return all(r.kind == "bernoulli" for r in self.rewards)

    @property
    def is_gaussian(self) -> bool:
        return all(r.kind == "gaussian" for r in self.rewards)


def build_instance(structure: GroupStructure, rewards: Sequence[RewardModel]) -> Instance:
    rewards = tuple(rewards)
    if len(rewards) != structure.num_arms:
        raise ModelError(f"expected {structure.num_arms} reward models, got {len(rewards)}")
    for r in rewards:
        if not isinstance(r, RewardModel):
            raise ModelError(f"not a RewardModel: {r!r}")
    mu = np.array([r.mean for r in rewards], dtype=float)
    G = structure.num_groups
    gap = np.full((G, structure.num_arms), np.nan)
    mu_star = np.empty(G)
    gap_min = np.empty(G)
    for g in range(G):
        arms = structure.arms_of(g)
        vals = mu[arms]
        best = float(vals.max())
        mu_star[g] = best
        gap[g, arms] = best - vals
        # second largest after removing a single maximizer; 0 on ties
        order = np.sort(vals)
        gap_min[g] = best - order[-2]
    gap_max = float(np.nanmax(gap))
    sigma = max(r.subgaussian for r in rewards)
    for arr in (mu, mu_star, gap, gap_min):
        arr.flags.writeable = False
    return Instance(structure, rewards, mu, mu_star, gap, gap_min, gap_max, sigma)


def gaussian_instance(structure: GroupStructure, means: Sequence[float], variance: float = 1.0) -> Instance:
    return build_instance(structure, [RewardModel.gaussian(m, variance) for m in means])


def bernoulli_instance(structure: GroupStructure, means: Sequence[float]) -> Instance:
    return build_instance(structure, [RewardModel.bernoulli(m) for m in means])


@dataclass(frozen=True)
class AlgoConfig:
    """Col-UCB constants.

    ``conf_const`` defaults to ``60 * c_G`` and ``burnin_pulls`` to
    ``ceil(16 * C * log T)``; ``const_scale`` multiplies both.
    """

    horizon: int
    c_G: float
    conf_const: float
    burnin_pulls: int
    const_scale: float = 1.0
    default_arm: str = "empirical_best"

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if not self.conf_const > 0:
            raise ValueError("conf_const must be positive")
        if self.burnin_pulls < 1:
            raise ValueError("burnin_pulls must be at least 1")
        if self.default_arm not in ("empirical_best", "ucb_best"):
            raise ValueError(f"unknown default_arm {self.default_arm!r}")

    @classmethod
    def for_structure(
        cls,
        structure: GroupStructure,
        horizon: int,
        const_scale: float = 1.0,
        default_arm: str = "empirical_best",
    ) -> "AlgoConfig":
        if horizon < 2:
            raise ValueError("horizon must be at least 2")
        if not const_scale > 0:
            raise ValueError("const_scale must be positive")
        log_t = math.log(horizon)
        c_G = 1.0 + math.log(max(structure.num_arms, structure.num_groups)) / log_t
        C = 60.0 * c_G * const_scale
        n0 = max(1, math.ceil(16.0 * C * log_t))
        return cls(horizon, c_G, C, n0, const_scale, default_arm)

    @property
    def log_t(self) -> float:
        return math.log(self.horizon)

    @property
    def radius_numerator(self) -> float:
        """``C log T``; the confidence width of an arm with ``n`` pulls is ``sqrt(this / n)``."""
        return self.conf_const * math.log(self.horizon)
