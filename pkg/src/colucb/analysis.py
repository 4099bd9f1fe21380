"""Sharing quantities of a group structure and instance-dependent regret functionals.

Structure side: ``H1``, ``H2-``, ``H2+``, ``H_T+-`` and their worst case over
subsets, ``phi`` and the improvement test. Instance side: the contention set
``C*(eps)``, the exploration-rate program ``M(eps)``, the integrals
``T(eps)``/``R(eps)`` and the thresholds derived from them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import GroupStructure, Instance, mask_of, members, popcount
from .lp import GE, LE, LpProblem, solve_lp
from .subsets import SubsetTables, check_cap

# gaps within this distance of eps count as "within eps" (float noise in mean differences)
GAP_ATOL = 1e-12
QUAD_RTOL = 1e-5
QUAD_ATOL = 1e-12
KNOTS_PER_DECADE = 8


# --------------------------------------------------------------------------- sharing


def _check_subset(structure: GroupStructure, S: int) -> None:
    if S <= 0:
        raise ValueError("S must be a nonempty arm set")
    if S & ~structure.full_mask:
        raise ValueError("S references arms outside the structure")


def touching(structure: GroupStructure, S: int) -> int:
    return sum(1 for m in structure.arm_sets if m & S)


def h1(structure: GroupStructure, S: int) -> float:
    _check_subset(structure, S)
    return touching(structure, S) / popcount(S)


def min_cover(structure: GroupStructure, S: int) -> tuple[int, int]:
    """Smallest set of groups covering ``S``: ``(size, group bitmask)``.

    Branch on the uncovered arm with the fewest covering groups, skip groups
    dominated on the remaining arms, memoize on the remaining-arm bitset.
    """
    _check_subset(structure, S)
    sets = structure.arm_sets

    @lru_cache(maxsize=None)
    def solve(rem: int) -> tuple[int, int]:
        if rem == 0:
            return 0, 0
        best_arm, best_groups = -1, None
        for a in members(rem):
            gs = [g for g, m in enumerate(sets) if m >> a & 1]
            if best_groups is None or len(gs) < len(best_groups):
                best_arm, best_groups = a, gs
        # drop g if another candidate covers a superset of g's remaining arms
        parts = [(g, sets[g] & rem) for g in best_groups]
        kept = []
        for g, p in parts:
            dominated = any(
                (p & ~q) == 0 and (p != q or h < g) for h, q in parts if h != g
            )
            if not dominated:
                kept.append((g, p))
        best = None
        for g, p in kept:
            k, chosen = solve(rem & ~p)
            if best is None or k + 1 < best[0]:
                best = (k + 1, chosen | (1 << g))
        return best

    return solve(S)


def h2_minus(structure: GroupStructure, S: int) -> float:
    return min_cover(structure, S)[0] / popcount(S)


def _trapped(structure: GroupStructure, U: int, S: int) -> int:
    return sum(1 for m in structure.arm_sets if (m & S) and not (m & ~U))


def h2_plus_cover(structure: GroupStructure, S: int) -> tuple[int, int]:
    """Minimize the number of groups meeting ``S`` and lying inside the cover's span.

    The count only depends on the span ``U`` and grows with ``U``, so a
    partial span already bounds every completion. Returns ``(count, groups)``.
    """
    _check_subset(structure, S)
    sets = structure.arm_sets
    best = [math.inf, 0]
    seen = set()

    def search(U: int, chosen: int):
        cost = _trapped(structure, U, S)
        if cost >= best[0]:
            return
        rem = S & ~U
        if rem == 0:
            best[0], best[1] = cost, chosen
            return
        if U in seen:
            return
        seen.add(U)
        a = min(members(rem), key=lambda x: (sum(1 for m in sets if m >> x & 1), x))
        options = sorted((g for g, m in enumerate(sets) if m >> a & 1),
                         key=lambda g: (_trapped(structure, U | sets[g], S), g))
        for g in options:
            search(U | sets[g], chosen | (1 << g))

    search(0, 0)
    return int(best[0]), best[1]


def h2_plus(structure: GroupStructure, S: int) -> float:
    return h2_plus_cover(structure, S)[0] / popcount(S)


@dataclass(frozen=True)
class SharingProfile:
    subset: int
    h1: float
    h2_minus: float
    h2_plus: float
    ht_minus: float
    ht_plus: float


def ht_bounds(structure: GroupStructure, S: int, T: float) -> tuple[float, float]:
    if T < 1:
        raise ValueError("T must be at least 1")
    a = h1(structure, S)
    rt = math.sqrt(T)
    return a + h2_minus(structure, S) ** 1.5 * rt, a + h2_plus(structure, S) ** 1.5 * rt


def sharing_profile(structure: GroupStructure, S: int, T: float) -> SharingProfile:
    lo, hi = ht_bounds(structure, S, T)
    return SharingProfile(S, h1(structure, S), h2_minus(structure, S), h2_plus(structure, S), lo, hi)


def _argmin_first(vals: np.ndarray) -> int:
    best = np.nanmin(vals)
    return int(np.flatnonzero(vals <= best)[0])


def bar_ht(structure: GroupStructure, T: float, sign: str = "-", *, force: bool = False,
           tables: SubsetTables | None = None) -> tuple[float, int]:
    """``min over nonempty S`` of ``H_T-(S)`` or ``H_T+(S)``; returns ``(value, argmin mask)``.

    Ties resolve to the numerically smallest mask. ``H_T+`` only needs its
    set-cover search on subsets whose ``H_T-`` (a lower bound) beats the incumbent.
    """
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    if T < 1:
        raise ValueError("T must be at least 1")
    tab = tables or SubsetTables(structure, force)
    rt = math.sqrt(T)
    lower = tab.h1() + tab.h2_minus() ** 1.5 * rt
    lower[0] = np.inf
    if sign == "-":
        k = _argmin_first(lower)
        return float(lower[k]), k
    order = np.lexsort((np.arange(len(lower)), lower))
    best, arg = math.inf, 0
    h1v = tab.h1()
    for S in order:
        S = int(S)
        if lower[S] > best:
            break
        val = h1v[S] + h2_plus(structure, S) ** 1.5 * rt
        if val < best or (val == best and S < arg):
            best, arg = float(val), S
    return best, arg


def theorem2_envelope(structure: GroupStructure, T: float, *, force: bool = False) -> tuple[float, float]:
    """``(T^(2/3) / barH+^(1/3), T^(2/3) / barH-^(1/3) * log T)``."""
    tab = SubsetTables(structure, force)
    plus, _ = bar_ht(structure, T, "+", tables=tab)
    minus, _ = bar_ht(structure, T, "-", tables=tab)
    t23 = T ** (2.0 / 3.0)
    return t23 / plus ** (1.0 / 3.0), t23 / minus ** (1.0 / 3.0) * math.log(T)


def phi(structure: GroupStructure, eps: float, *, force: bool = False,
        tables: SubsetTables | None = None) -> float:
    """``1/2 * min_S [H1(S) + (1/eps - 1) H2-(S)]``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    tab = tables or SubsetTables(structure, force)
    v = tab.h1()[1:] + (1.0 / eps - 1.0) * tab.h2_minus()[1:]
    return 0.5 * float(v.min())


def sufficient_improvement(structure: GroupStructure, T: float, alpha: float, *, force: bool = False) -> bool:
    if alpha < 1:
        raise ValueError("alpha must be at least 1")
    tab = SubsetTables(structure, force)
    return float(tab.h1()[1:].min()) >= alpha * math.sqrt(T) / structure.max_group_size ** 1.5


# --------------------------------------------------------------------------- instance functionals


def _within(gap: np.ndarray, eps: float) -> np.ndarray:
    return gap <= eps + GAP_ATOL


def contention_star(instance: Instance, eps: float) -> int:
    if not eps > 0:
        raise ValueError("eps must be positive")
    mask = 0
    for g in range(instance.num_groups):
        if instance.gap_min[g] <= eps + GAP_ATOL:
            row = instance.gap[g]
            mask |= mask_of(np.flatnonzero(np.isfinite(row) & _within(row, eps)))
    return mask


def m_problem(instance: Instance, eps: float, cstar: int | None = None) -> tuple[LpProblem | None, list]:
    """The ``M(eps)`` program restricted to contention arms (other arms only spend budget).

    ``cstar`` overrides the contention set. Returns ``(None, [])`` when it is empty.
    """
    if cstar is None:
        cstar = contention_star(instance, eps)
    if cstar == 0:
        return None, []
    arms = members(cstar)
    pairs = [(g, a) for a in arms for g in instance.structure.groups_of(a)]
    pairs.sort()
    groups = sorted({g for g, _ in pairs})
    nv = len(pairs) + 1
    A = np.zeros((len(groups) + len(arms), nv))
    row_of_g = {g: i for i, g in enumerate(groups)}
    row_of_a = {a: len(groups) + i for i, a in enumerate(arms)}
    for j, (g, a) in enumerate(pairs):
        A[row_of_g[g], j] = max(instance.gap[g, a], eps)
        A[row_of_a[a], j] = 1.0
    A[len(groups):, -1] = -1.0
    b = np.concatenate([np.ones(len(groups)), np.zeros(len(arms))])
    # normalize budget rows so tiny eps stays above the pivot threshold
    scale = A[: len(groups)].max(axis=1)
    A[: len(groups)] /= scale[:, None]
    b[: len(groups)] /= scale
    c = np.zeros(nv)
    c[-1] = 1.0
    return LpProblem(c, A, (LE,) * len(groups) + (GE,) * len(arms), b), pairs


def m_eps(instance: Instance, eps: float, cstar: int | None = None) -> float:
    """``M(eps)``; ``math.inf`` when the contention set is empty."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    prob, _ = m_problem(instance, eps, cstar)
    if prob is None:
        return math.inf
    sol = solve_lp(prob)
    if sol.status == "unbounded":
        return math.inf
    if not sol.optimal:
        raise RuntimeError(f"M program returned {sol.status}")
    return sol.value


def _simpson_adaptive(f, a, b, fa, fm, fb, whole, depth, out_nodes=None):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    h = b - a
    left = h / 12.0 * (fa + 4.0 * flm + fm)
    right = h / 12.0 * (fm + 4.0 * frm + fb)
    both = left + right
    err = np.abs(both - whole)
    tol = 15.0 * np.maximum(QUAD_RTOL * np.abs(both), QUAD_ATOL)
    if depth <= 0 or np.all(err <= tol):
        return both + (both - whole) / 15.0
    return (_simpson_adaptive(f, a, m, fa, flm, fm, left, depth - 1)
            + _simpson_adaptive(f, m, b, fm, frm, fb, right, depth - 1))


def simpson(f, a: float, b: float, max_depth: int = 40) -> np.ndarray:
    """Vector-valued adaptive Simpson; all components share the same nodes."""
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_adaptive(f, a, b, fa, fm, fb, whole, max_depth)


class Functionals:
    """Evaluators of ``M``, ``T(eps)`` and ``R(eps)`` for one instance and ``sigma``.

    Integration runs in ``u = log z`` over pieces cut at every gap breakpoint
    (mapped to ``z = gap / sigma``) and at ``KNOTS_PER_DECADE`` log-spaced
    knots; each piece uses the contention set of its interior. Both integrands
    share nodes, so ``T >= R >= eps T`` carries over from the integrands.
    """

    def __init__(self, instance: Instance, sigma: float | None = None):
        sigma = instance.sigma if sigma is None else float(sigma)
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.instance = instance
        self.sigma = sigma
        vals = instance.gap_values()
        self.breakpoints = vals[vals > 0]
        self._m_cache: dict = {}
        self._piece_cache: dict = {}

    # M in the eps variable -------------------------------------------------
    def M(self, eps: float, cstar: int | None = None) -> float:
        key = (float(eps), cstar)
        v = self._m_cache.get(key)
        if v is None:
            v = m_eps(self.instance, eps, cstar)
            self._m_cache[key] = v
        return v

    # knots in the z variable ----------------------------------------------
    def _knots_between(self, lo: float, hi: float) -> list[float]:
        zs = {lo, hi}
        for b in self.breakpoints / self.sigma:
            if lo < b < hi:
                zs.add(float(b))
        j_lo = math.ceil(-KNOTS_PER_DECADE * math.log10(hi))
        j_hi = math.floor(-KNOTS_PER_DECADE * math.log10(lo))
        for j in range(j_lo, j_hi + 1):
            z = 10.0 ** (-j / KNOTS_PER_DECADE)
            if lo < z < hi:
                zs.add(z)
        return sorted(zs)

    def _piece(self, z0: float, z1: float) -> np.ndarray:
        """``[T-part, R-part]`` over ``[z0, z1]``, a stretch with constant contention set."""
        s = self.sigma
        cstar = contention_star(self.instance, s * math.sqrt(z0 * z1))
        if cstar == 0:
            return np.zeros(2)

        def f(u):
            z = math.exp(u)
            m = self.M(s * z, cstar)
            if m == math.inf:
                return np.zeros(2)
            base = s / (m * z ** 3)
            return np.array([base, base * s * z])

        return simpson(f, math.log(z0), math.log(z1))

    def _full_piece(self, z0: float, z1: float) -> np.ndarray:
        key = (z0, z1)
        v = self._piece_cache.get(key)
        if v is None:
            v = self._piece(z0, z1)
            self._piece_cache[key] = v
        return v

    def integrals(self, eps: float) -> np.ndarray:
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if eps == 1:
            return np.zeros(2)
        knots = self._knots_between(eps, 1.0)
        # pieces above the first interior knot come from a grid independent of eps
        total = np.zeros(2)
        for z0, z1 in zip(knots[1:-1], knots[2:]):
            total += self._full_piece(z0, z1)
        total += self._piece(knots[0], knots[1])
        return total

    def T_of(self, eps: float) -> float:
        return float(self.integrals(eps)[0])

    def R_of(self, eps: float) -> float:
        return float(self.integrals(eps)[1])

    @property
    def plateau(self) -> float:
        """Below this ``z`` the contention set is empty and ``T`` stops growing (0 if never)."""
        gm = np.asarray(self.instance.gap_min)
        return float(gm.min()) / self.sigma if gm.min() > GAP_ATOL else 0.0


def t_r_functionals(instance: Instance, sigma: float | None = None) -> Functionals:
    return Functionals(instance, sigma)


def eps_T(instance: Instance, sigma: float | None, T_target: float, *,
          functionals: Functionals | None = None, rtol: float = 1e-8) -> float:
    """Solve ``T(eps) = T_target`` by bisection in ``log eps``.

    If ``T`` levels off below the target (empty contention set for small
    ``eps``), the plateau edge is returned.
    """
    if not T_target > 0:
        raise ValueError("T_target must be positive")
    F = functionals or Functionals(instance, sigma)
    hi = 1.0
    lo = 0.5
    floor = F.plateau
    while F.T_of(lo) < T_target:
        if lo <= floor:
            return min(1.0, floor)
        lo = max(lo * 0.5, floor) if floor > 0 else lo * 0.5
        if lo < 1e-300:
            raise RuntimeError("eps_T bracket search did not converge")
    # T(lo) >= target > T(hi) = 0
    for _ in range(400):
        if hi - lo <= rtol * lo:
            break
        mid = math.sqrt(lo * hi)
        if F.T_of(mid) >= T_target:
            lo = mid
        else:
            hi = mid
    else:
        raise RuntimeError("eps_T bisection did not converge")
    return lo if abs(F.T_of(lo) - T_target) <= abs(F.T_of(hi) - T_target) else hi


def _pieces_in_eps(instance: Instance, lo: float = 1e-9) -> list[tuple[float, float]]:
    vals = instance.gap_values()
    cuts = sorted({lo, 1.0, *[float(v) for v in vals if lo < v < 1.0]})
    return list(zip(cuts[:-1], cuts[1:]))


def eps_star(instance: Instance, T: float, *, scan_points: int = 64) -> float:
    """Smallest ``z`` in ``(0, 1]`` with ``M(z) z^3 T >= 1``; 1 if none.

    Pieces with an empty contention set (``M = inf``) are skipped.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    for z0, z1 in _pieces_in_eps(instance):
        cstar = contention_star(instance, math.sqrt(z0 * z1))
        if cstar == 0:
            continue

        def g(z):
            return m_eps(instance, z, cstar) * z ** 3 * T - 1.0

        zs = np.geomspace(z0, z1, scan_points)
        prev = None
        for z in zs:
            if g(z) >= 0:
                if prev is None:
                    return float(z)
                lo, hi = prev, float(z)
                while hi - lo > 1e-13 * hi:
                    mid = 0.5 * (lo + hi)
                    if g(mid) >= 0:
                        hi = mid
                    else:
                        lo = mid
                return hi
            prev = float(z)
    return 1.0


def condition_grid(instance: Instance, grid: int = 64) -> np.ndarray:
    bps = instance.gap_values()
    bps = bps[(bps > 0) & (bps <= 1)]
    lo = min(1e-3, float(bps.min()) / 2) if bps.size else 1e-3
    return np.unique(np.concatenate([np.geomspace(lo, 1.0, grid), bps]))


def condition_check(instance: Instance, C1: float, alpha: float, grid: int = 64, *, rtol: float = 1e-9) -> bool:
    """Check ``M(z1) <= C1 (z2/z1)^(2-alpha) M(z2)`` for all grid pairs ``z1 <= z2``."""
    if C1 < 1:
        raise ValueError("C1 must be at least 1")
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    if grid < 2:
        raise ValueError("grid must be at least 2")
    zs = condition_grid(instance, grid)
    ms = np.array([m_eps(instance, z) for z in zs])
    for i, z1 in enumerate(zs):
        for j in range(i, len(zs)):
            m1, m2 = ms[i], ms[j]
            if math.isinf(m2):
                continue
            if math.isinf(m1):
                return False
            if m1 > C1 * (zs[j] / z1) ** (2 - alpha) * m2 * (1 + rtol):
                return False
    return True


def r_t_max_estimate(family, T: float, sigma: float | None = None) -> tuple[float, int]:
    """Largest ``R(eps_T(I); I)`` over a supplied family: a lower estimate of the sup over all instances."""
    best, arg = -math.inf, -1
    for k, inst in enumerate(family):
        F = Functionals(inst, sigma)
        v = F.R_of(eps_T(inst, sigma, T, functionals=F))
        if v > best:
            best, arg = v, k
    return best, arg
