"""Small oracle suites run by ``colucb selftest``."""
from __future__ import annotations

import math
import random
from typing import Callable

import numpy as np

from . import oracles
from .analysis import Functionals, eps_T, eps_star, h2_minus, h2_plus, m_eps
from .core import GroupStructure, all_shared, gaussian_instance
from .flow import compute_t0, max_flow, t0_enumeration
from .lp import GE, LE, LpProblem, duality_gap, solve_lp


def random_structure(rng: random.Random, max_groups: int = 6, max_arms: int = 8) -> GroupStructure:
    n = rng.randint(2, max_arms)
    G = rng.randint(1, max_groups)
    groups = [rng.sample(range(n), rng.randint(2, n)) for _ in range(G)]
    covered = set().union(*groups)
    for a in range(n):
        if a not in covered:
            groups[rng.randrange(G)].append(a)
    return GroupStructure.from_lists(n, groups)


def random_bounded_lp(rng: np.random.Generator, n: int = 4, m: int = 5) -> LpProblem:
    """Random feasible LP kept bounded by a box row ``sum x <= B``."""
    A = rng.uniform(-1, 1, size=(m, n))
    x0 = rng.uniform(0, 1, size=n)
    slack = rng.uniform(0, 0.5, size=m)
    senses = tuple(rng.choice([LE, GE]) for _ in range(m))
    b = np.array([A[i] @ x0 + (slack[i] if s == LE else -slack[i]) for i, s in enumerate(senses)])
    A = np.vstack([A, np.ones(n)])
    b = np.append(b, x0.sum() + 1.0 + rng.uniform(0, 2))
    return LpProblem(rng.normal(size=n), A, senses + (LE,), b)


def suite_lp(pivot_tol: float, count: int = 40) -> bool:
    rng = np.random.default_rng(7)
    for _ in range(count):
        p = random_bounded_lp(rng, int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        sol = solve_lp(p, pivot_tol=pivot_tol)
        ref = oracles.lp_vertex_enumeration(p)
        if not sol.optimal or abs(sol.value - ref) > 1e-8 * max(1, abs(ref)):
            return False
        if duality_gap(p, sol) > 1e-8 * max(1.0, abs(sol.value)):
            return False
    return True


def suite_flow(count: int = 30) -> bool:
    rng = random.Random(11)
    for _ in range(count):
        n = 8
        edges = [(u, v, rng.randint(0, 3)) for u in range(n) for v in range(n) if u != v and rng.random() < 0.3]
        if max_flow(n, edges, 0, n - 1)[0] != oracles.min_cut_enumeration(n, edges, 0, n - 1):
            return False
    return True


def suite_t0(count: int = 40) -> bool:
    rng = random.Random(13)
    for _ in range(count):
        s = random_structure(rng)
        if abs(compute_t0(s) - float(t0_enumeration(s))) > 1e-9:
            return False
    return True


def suite_cover(count: int = 30) -> bool:
    rng = random.Random(17)
    for _ in range(count):
        s = random_structure(rng)
        for S in range(1, 1 << s.num_arms):
            _, m, p = oracles.h_enumeration(s, S)
            if h2_minus(s, S) != m or h2_plus(s, S) != p:
                return False
    return True


def suite_functionals() -> bool:
    G, A, T = 3, 4, 500.0
    inst = gaussian_instance(all_shared(G, A), [0.5] * A)
    F = Functionals(inst)
    for e in (0.05, 0.2, 0.7):
        if abs(m_eps(inst, e) / oracles.shared_M(G, A, e) - 1) > 1e-6:
            return False
        if abs(F.T_of(e) / oracles.shared_T(G, A, e) - 1) > 1e-5:
            return False
        if abs(F.R_of(e) / oracles.shared_R(G, A, e) - 1) > 1e-5:
            return False
    if abs(eps_T(inst, None, T, functionals=F) / oracles.shared_eps_T(G, A, T) - 1) > 1e-5:
        return False
    return abs(eps_star(inst, T) / oracles.shared_eps_star(G, A, T) - 1) <= 1e-6


def run_suites(pivot_tol: float = 1e-10, emit: Callable[[str], None] = print) -> bool:
    suites = {
        "lp-duality": lambda: suite_lp(pivot_tol),
        "flow-mincut": suite_flow,
        "t0-duality": suite_t0,
        "setcover": suite_cover,
        "functionals": suite_functionals,
    }
    ok = True
    for name, fn in suites.items():
        try:
            passed = bool(fn())
        except Exception as exc:  # a crashing suite is a failing suite
            passed = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        emit(f"{'PASS' if passed else 'FAIL'} {name}")
        ok &= passed
    return ok
