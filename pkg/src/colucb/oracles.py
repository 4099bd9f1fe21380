"""Brute-force reference computations used to certify the fast solvers at small sizes."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .core import GroupStructure
from .lp import EQ, GE, LE, LpProblem


def lp_vertex_enumeration(problem: LpProblem, tol: float = 1e-9) -> float | None:
    """Best objective over all basic feasible solutions; ``None`` if none exist.

    Only meaningful for bounded problems.
    """
    A, b, c = problem.A, problem.b, problem.c
    m, n = A.shape
    # every constraint as a row of an n-column system, plus x_j >= 0
    rows = [A[i] for i in range(m)] + [np.eye(n)[j] for j in range(n)]
    rhs = list(b) + [0.0] * n
    eq_rows = [i for i, s in enumerate(problem.senses) if s == EQ]
    best = None
    for active in itertools.combinations(range(m + n), n):
        if not set(eq_rows) <= set(active):
            continue
        M = np.array([rows[i] for i in active])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, np.array([rhs[i] for i in active]))
        if (x < -tol).any():
            continue
        r = A @ x - b
        ok = all((s == LE and ri <= tol) or (s == GE and ri >= -tol) or (s == EQ and abs(ri) <= tol)
                 for ri, s in zip(r, problem.senses))
        if ok:
            v = float(c @ x)
            best = v if best is None else max(best, v)
    return best


def min_cut_enumeration(num_nodes: int, edges, source: int, sink: int) -> int:
    others = [v for v in range(num_nodes) if v not in (source, sink)]
    best = math.inf
    for bits in range(1 << len(others)):
        side = {source} | {v for k, v in enumerate(others) if bits >> k & 1}
        cut = sum(c for u, v, c in edges if u in side and v not in side)
        best = min(best, cut)
    return int(best)


def cover_enumeration(structure: GroupStructure, S: int) -> tuple[int, int]:
    """``(min cover size, min trapped-group count)`` for ``S`` over every group subset."""
    G = structure.num_groups
    best_minus, best_plus = math.inf, math.inf
    for sub in range(1, 1 << G):
        U = structure.cover(sub)
        if S & ~U:
            continue
        best_minus = min(best_minus, bin(sub).count("1"))
        trapped = sum(1 for m in structure.arm_sets if (m & S) and not (m & ~U))
        best_plus = min(best_plus, trapped)
    return int(best_minus), int(best_plus)


def cover_enumeration_all(structure: GroupStructure) -> tuple[np.ndarray, np.ndarray]:
    """:func:`cover_enumeration` for every ``S`` at once; index 0 (empty ``S``) is unused."""
    G, n = structure.num_groups, structure.num_arms
    masks = np.array(structure.arm_sets, dtype=np.int64)
    subs = np.arange(1, 1 << G, dtype=np.int64)
    bits = (subs[:, None] >> np.arange(G)) & 1  # (subs, G)
    span = np.bitwise_or.reduce(np.where(bits == 1, masks, 0), axis=1)
    size = bits.sum(axis=1)
    inside = ((masks[None, :] & ~span[:, None]) == 0).astype(np.int64) << np.arange(G)
    inside = inside.sum(axis=1)  # groups contained in the span, as a bitmask
    Ss = np.arange(1 << n, dtype=np.int64)
    touching = (((Ss[:, None] & masks[None, :]) != 0).astype(np.int64) << np.arange(G)).sum(axis=1)
    best_minus = np.full(1 << n, np.iinfo(np.int64).max)
    best_plus = np.full(1 << n, np.iinfo(np.int64).max)
    for k in range(len(subs)):
        ok = (Ss & ~span[k]) == 0
        trapped = np.bitwise_count((inside[k] & touching).astype(np.uint64)).astype(np.int64)
        best_minus = np.where(ok, np.minimum(best_minus, size[k]), best_minus)
        best_plus = np.where(ok, np.minimum(best_plus, trapped), best_plus)
    return best_minus, best_plus


def h_enumeration(structure: GroupStructure, S: int) -> tuple[float, float, float]:
    """``(H1, H2-, H2+)`` of ``S`` by plain enumeration."""
    k = bin(S).count("1")
    touch = sum(1 for m in structure.arm_sets if m & S)
    cm, cp = cover_enumeration(structure, S)
    return touch / k, cm / k, cp / k


def bar_ht_enumeration(structure: GroupStructure, T: float, sign: str) -> float:
    best = math.inf
    for S in range(1, 1 << structure.num_arms):
        a, m, p = h_enumeration(structure, S)
        best = min(best, a + (m if sign == "-" else p) ** 1.5 * math.sqrt(T))
    return best


# closed forms on the all-shared, equal-means family (G groups over the same A arms)

def shared_M(G: int, A: int, eps: float) -> float:
    return G / (eps * A)


def shared_T(G: int, A: int, eps: float, sigma: float = 1.0) -> float:
    # integral of sigma dz / (M(sigma z) z^4) with M(sigma z) = G / (sigma z A)
    return sigma * sigma * A / (2.0 * G) * (eps ** -2 - 1.0)


def shared_R(G: int, A: int, eps: float, sigma: float = 1.0) -> float:
    return sigma ** 3 * A / G * (1.0 / eps - 1.0)


def shared_eps_T(G: int, A: int, T: float) -> float:
    return (1.0 + 2.0 * G * T / A) ** -0.5


def shared_eps_star(G: int, A: int, T: float) -> float:
    return min(1.0, math.sqrt(A / (G * T)))
