"""Burn-in scheduling via integral max-flow.

The burn-in rate ``t0`` is the value of

    min t  s.t.  sum_a x[g, a] <= t  (every group),  sum_g x[g, a] >= 1  (every arm)

which equals ``max |Cov(G') minus Cov(G \\ G')| / |G'|`` over nonempty group
subsets ``G'``. A schedule of ``ceil(n0 * t0)`` rounds that pulls every arm
at least ``n0`` times comes out of an integral flow
source -> group -> arm -> sink.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import GroupStructure
from .lp import GE, LE, LpProblem, solve_lp

# subset-enumeration cross-check of the LP value runs up to this many groups
T0_CHECK_GROUPS = 20


class FlowError(ValueError):
    pass


def max_flow(num_nodes: int, edges: Sequence[tuple[int, int, int]], source: int, sink: int):
    """Dinic's algorithm on integer capacities.

    Returns ``(value, flows)`` with ``flows[i]`` the flow on ``edges[i]``.
    """
    if not (0 <= source < num_nodes and 0 <= sink < num_nodes) or source == sink:
        raise FlowError("source and sink must be distinct valid nodes")
    head = [[] for _ in range(num_nodes)]
    to, cap = [], []
    for u, v, c in edges:
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise FlowError(f"edge ({u}, {v}) references a missing node")
        if c < 0 or int(c) != c:
            raise FlowError(f"capacity must be a nonnegative integer, got {c}")
        head[u].append(len(to))
        to.append(v)
        cap.append(int(c))
        head[v].append(len(to))
        to.append(u)
        cap.append(0)

    total = 0
    while True:
        level = [-1] * num_nodes
        level[source] = 0
        q = deque([source])
        while q:
            u = q.popleft()
            for e in head[u]:
                if cap[e] > 0 and level[to[e]] < 0:
                    level[to[e]] = level[u] + 1
                    q.append(to[e])
        if level[sink] < 0:
            break
        it = [0] * num_nodes

        def push(u, limit):
            if u == sink:
                return limit
            while it[u] < len(head[u]):
                e = head[u][it[u]]
                v = to[e]
                if cap[e] > 0 and level[v] == level[u] + 1:
                    got = push(v, min(limit, cap[e]))
                    if got:
                        cap[e] -= got
                        cap[e ^ 1] += got
                        return got
                it[u] += 1
            return 0

        while True:
            f = push(source, math.inf)
            if not f:
                break
            total += f
    flows = [cap[2 * i + 1] for i in range(len(edges))]
    return total, flows


def _t0_lp(structure: GroupStructure) -> float:
    pairs = [(g, a) for g in range(structure.num_groups) for a in structure.arms_of(g)]
    nv = len(pairs) + 1  # last variable is t
    G, n = structure.num_groups, structure.num_arms
    A = np.zeros((G + n, nv))
    for j, (g, a) in enumerate(pairs):
        A[g, j] = 1.0
        A[G + a, j] = 1.0
    A[:G, -1] = -1.0
    c = np.zeros(nv)
    c[-1] = -1.0
    b = np.concatenate([np.zeros(G), np.ones(n)])
    sol = solve_lp(LpProblem(c, A, (LE,) * G + (GE,) * n, b))
    return -sol.value


def t0_enumeration(structure: GroupStructure) -> Fraction:
    """Exact ``t0`` from the max-over-group-subsets form (2^|G| work)."""
    G = structure.num_groups
    if G > 26:
        raise FlowError("subset enumeration over more than 26 groups is not supported")
    masks = np.array(structure.arm_sets, dtype=np.uint64)
    cov = np.zeros(1 << G, dtype=np.uint64)
    for i in range(G):
        cov[1 << i: 1 << (i + 1)] = cov[: 1 << i] | masks[i]
    full = (1 << G) - 1
    idx = np.arange(1, 1 << G, dtype=np.int64)
    only = cov[idx] & ~cov[full ^ idx]
    num = np.bitwise_count(only).astype(np.int64)
    den = np.bitwise_count(idx.astype(np.uint64)).astype(np.int64)
    # exact comparison of fractions num/den by cross-multiplication
    best_n, best_d = 0, 1
    vals = num / den
    for k in np.flatnonzero(vals >= vals.max() - 1e-12):
        if num[k] * best_d > best_n * den[k]:
            best_n, best_d = int(num[k]), int(den[k])
    return Fraction(best_n, best_d)


def compute_t0(structure: GroupStructure) -> float:
    """LP value of the burn-in rate, cross-checked by subset enumeration for small ``|G|``."""
    val = _t0_lp(structure)
    if structure.num_groups <= T0_CHECK_GROUPS:
        exact = t0_enumeration(structure)
        if abs(val - float(exact)) > 1e-9 * max(1.0, float(exact)):
            raise AssertionError(f"t0 LP {val!r} disagrees with enumeration {exact}")
    return val


def t0_fraction(structure: GroupStructure) -> Fraction:
    """``t0`` as an exact rational. Its denominator is a group count, so at most ``|G|``."""
    if structure.num_groups <= T0_CHECK_GROUPS:
        return t0_enumeration(structure)
    return Fraction(_t0_lp(structure)).limit_denominator(structure.num_groups)


def t_min(structure: GroupStructure, n0: int) -> int:
    return math.ceil(n0 * t0_fraction(structure))


@dataclass(frozen=True)
class BurninSchedule:
    length: int
    pulls: tuple[tuple[int, ...], ...]  # pulls[r][g]
    t0: Fraction
    n0: int

    def arm_counts(self, num_arms: int) -> np.ndarray:
        counts = np.zeros(num_arms, dtype=np.int64)
        for row in self.pulls:
            for a in row:
                counts[a] += 1
        return counts


def burn_in_schedule(structure: GroupStructure, n0: int) -> BurninSchedule:
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    t0 = t0_fraction(structure)
    length = math.ceil(n0 * t0)
    G, n = structure.num_groups, structure.num_arms
    # nodes: 0 source, 1..G groups, G+1..G+n arms, G+n+1 sink
    src, snk = 0, G + n + 1
    edges = [(src, 1 + g, length) for g in range(G)]
    ga = []
    for g in range(G):
        for a in structure.arms_of(g):
            ga.append((g, a))
            edges.append((1 + g, 1 + G + a, length))
    edges += [(1 + G + a, snk, n0) for a in range(n)]
    value, flows = max_flow(G + n + 2, edges, src, snk)
    if value != n0 * n:
        raise AssertionError(f"burn-in flow is not saturating: {value} < {n0 * n}")
    seqs = []
    for g in range(G):
        seq = []
        for k, (gg, a) in enumerate(ga):
            if gg == g:
                seq.extend([a] * flows[G + k])
        if not seq:
            seq = [structure.arms_of(g)[0]]
        seqs.append(seq)
    pulls = tuple(tuple(seqs[g][r % len(seqs[g])] for g in range(G)) for r in range(length))
    return BurninSchedule(length, pulls, t0, n0)
