"""Adversarial instance generators: single-arm perturbations and the three-level minimax family."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .algo import run
from .analysis import Functionals, contention_star, eps_T, m_eps
from .core import AlgoConfig, GroupStructure, Instance, ModelError, RewardModel, build_instance, members

Z_GRID = 256


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    base: Instance
    target_arm: int
    group: int
    magnitude: float
    sign: str
    anchor: float  # second-best mean of ``group`` once ``target_arm`` is removed

    def apply(self) -> Instance:
        return perturb_second_best(self.base, self.target_arm, self.group, self.magnitude, self.sign)


def _mz2(instance: Instance, z: float) -> float:
    m = m_eps(instance, z)
    return m * z * z


def z_T(instance: Instance, T: float, *, sigma: float | None = None, functionals: Functionals | None = None) -> float:
    """Minimizer of ``M(z) z^2`` over ``[eps_T, (1 + eps_T)/2]``; ties go to the smallest ``z``."""
    if T < 2:
        raise ValueError("T must be at least 2")
    e = eps_T(instance, sigma, T, functionals=functionals)
    lo, hi = e, 0.5 * (1.0 + e)
    if hi <= lo:
        return lo
    bps = instance.gap_values()
    zs = np.unique(np.concatenate([np.linspace(lo, hi, Z_GRID), bps[(bps > lo) & (bps < hi)]]))
    vals = np.array([_mz2(instance, z) for z in zs])
    if not np.isfinite(vals).any():
        raise ValueError("contention set is empty on the whole z_T interval")
    best = vals.min()
    k = int(np.flatnonzero(vals <= best * (1 + 1e-12))[0])
    z_best, v_best = float(zs[k]), float(vals[k])
    # local refinement between the grid neighbours
    a, b = float(zs[max(k - 1, 0)]), float(zs[min(k + 1, len(zs) - 1)])
    if b > a:
        res = minimize_scalar(lambda z: _mz2(instance, z), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, b)})
        if res.success and res.fun < v_best * (1 - 1e-12):
            z_best = float(res.x)
    return z_best


def anchor_value(base: Instance, a0: int, g0: int) -> float:
    arms = [a for a in base.structure.arms_of(g0) if a != a0]
    return float(max(base.mu[a] for a in arms))


def perturb_second_best(base: Instance, a0: int, g0: int, eps: float, sign: str, *,
                        clamped: bool = False) -> Instance:
    """Move arm ``a0`` to ``nu +- eps`` with ``nu`` the best other mean in group ``g0``.

    ``clamped`` uses ``min(eps, 1/4)``, which keeps Bernoulli bases with means
    in ``[1/4, 3/4]`` inside ``[0, 1]``.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not base.structure.arm_sets[g0] >> a0 & 1:
        raise ValueError(f"arm {a0} is not feasible for group {g0}")
    if clamped:
        eps = min(eps, 0.25)
    nu = anchor_value(base, a0, g0)
    value = nu + eps if sign == "+" else nu - eps
    if base.rewards[a0].kind == "bernoulli" and not 0.0 <= value <= 1.0:
        raise ModelError(f"perturbed Bernoulli mean {value} leaves [0, 1]")
    means = base.mu.copy()
    means[a0] = value
    return base.with_means(means)


def minimax_family(structure: GroupStructure, S: int, cover_groups: int, kind: str = "gaussian",
                   variance: float = 1.0) -> Instance:
    """Means 1 outside the cover's span, 0 on span minus ``S``, 1/2 on ``S``."""
    span = structure.cover(cover_groups)
    if S == 0 or S & ~span:
        raise ValueError("S must be nonempty and covered by cover_groups")
    means = []
    for a in range(structure.num_arms):
        bit = 1 << a
        means.append(0.5 if S & bit else (0.0 if span & bit else 1.0))
    if kind == "gaussian":
        models = [RewardModel.gaussian(m, variance) for m in means]
    elif kind == "bernoulli":
        models = [RewardModel.bernoulli(m) for m in means]
    else:
        raise ValueError(f"unknown reward kind {kind!r}")
    return build_instance(structure, models)


@dataclass(frozen=True, eq=False)
class AdversaryPair:
    plus: Instance
    minus: Instance
    spec_plus: PerturbationSpec
    spec_minus: PerturbationSpec
    z_T: float
    pilot_rounds: int
    pilot_pulls: dict

    def __iter__(self):
        return iter((self.plus, self.minus))


def pilot_rounds(instance: Instance, T: float, z: float) -> int:
    """``(1 - eps_T) / (100 M(z) z^3)`` rounded, clipped to ``[1, T]``."""
    e = eps_T(instance, None, T)
    m = m_eps(instance, z)
    raw = (1.0 - e) / (100.0 * m * z ** 3) if math.isfinite(m) else T
    return int(min(max(1, round(raw)), T))


def theorem4_adversary(base: Instance, T: int, algorithm: str = "ColUCB", *,
                       config: AlgoConfig | None = None, pilot_seeds: int = 20,
                       const_scale: float = 1.0) -> AdversaryPair:
    """Build ``J+``/``J-`` around the least-pulled contention arm of pilot runs on ``base``."""
    if not base.is_gaussian or any(r.variance != 1.0 for r in base.rewards):
        raise ModelError("the adversary expects a unit-variance Gaussian base")
    z = z_T(base, T)
    cstar = members(contention_star(base, z))
    if not cstar:
        raise ValueError("contention set at z_T is empty; no arm to perturb")
    rounds = pilot_rounds(base, T, z)
    config = config or AlgoConfig.for_structure(base.structure, T, const_scale)
    pulls = {a: 0.0 for a in cstar}
    if len(cstar) > 1:
        for seed in range(pilot_seeds):
            tr = run(algorithm, base, config, seed, max_rounds=rounds)
            counts = np.bincount(tr.actions.ravel(), minlength=base.num_arms)
            for a in cstar:
                pulls[a] += counts[a] / pilot_seeds
    a0 = min(cstar, key=lambda a: (pulls[a], a))
    g0 = next(g for g in range(base.num_groups)
              if base.structure.arm_sets[g] >> a0 & 1
              and base.gap_min[g] <= z + 1e-12 and base.gap[g, a0] <= z + 1e-12)
    nu = anchor_value(base, a0, g0)
    sp = PerturbationSpec(base, a0, g0, z, "+", nu)
    sm = PerturbationSpec(base, a0, g0, z, "-", nu)
    return AdversaryPair(sp.apply(), sm.apply(), sp, sm, z, rounds, pulls)
