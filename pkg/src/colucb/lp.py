"""Dense two-phase simplex with Bland's rule and certified primal/dual output.

Problems are ``maximize c @ x  s.t.  A x (<=|>=|=) b,  x >= 0``. Every
optimal answer is checked for primal feasibility, dual feasibility and
a zero duality gap before it is returned; a failed check raises
:class:`LpNumericalError` instead of handing back a wrong answer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

LE, GE, EQ = "<=", ">=", "="

FEAS_TOL = 1e-9
GAP_TOL = 1e-8
PIVOT_TOL = 1e-10
_MAX_ITER = 50_000


class LpError(ValueError):
    pass


class LpNumericalError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2:
            A = A.reshape(len(b), len(c))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "senses", tuple(self.senses))
        m, n = A.shape
        if c.shape != (n,) or b.shape != (m,) or len(self.senses) != m:
            raise LpError(f"dimension mismatch: A {A.shape}, c {c.shape}, b {b.shape}, senses {len(self.senses)}")
        for s in self.senses:
            if s not in (LE, GE, EQ):
                raise LpError(f"unknown constraint sense {s!r}")
        if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(c).all()):
            raise LpError("LP data must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: str  # "optimal" | "unbounded" | "infeasible"
    primal: np.ndarray
    dual: np.ndarray
    value: float

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    row = T[r] / T[r, c]
    col = T[:, c].copy()
    T -= np.outer(col, row)
    T[r] = row


def _run(T, basis, m, allowed, pivot_tol):
    """Bland's-rule simplex on tableau ``T``; the last row holds reduced costs
    ``z_j - c_j`` of a maximization, so a column may enter while negative."""
    obj = T[m]
    for _ in range(_MAX_ITER):
        cand = np.flatnonzero(obj[:-1][allowed] < -pivot_tol)
        if cand.size == 0:
            return "optimal"
        j = int(allowed[cand[0]])
        col = T[:m, j]
        pos = np.flatnonzero(col > pivot_tol)
        if pos.size == 0:
            return "unbounded"
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        _pivot(T, r, j)
        basis[r] = j
    raise LpNumericalError("simplex iteration limit reached")


def solve_lp(problem: LpProblem, *, pivot_tol: float = PIVOT_TOL, feas_tol: float = FEAS_TOL,
             gap_tol: float = GAP_TOL) -> LpSolution:
    """Solve ``problem``; deterministic for identical input (fixed Bland pivoting)."""
    A, b, c = problem.A, problem.b, problem.c
    m, n = A.shape
    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign
    senses = list(problem.senses)
    for i in range(m):
        if sign[i] < 0 and senses[i] != EQ:
            senses[i] = GE if senses[i] == LE else LE

    n_slack = sum(s != EQ for s in senses)
    n_art = sum(s != LE for s in senses)
    N = n + n_slack + n_art
    # standard-form matrix [A | slack | artificial]
    S = np.zeros((m, N))
    S[:, :n] = As
    basis = np.empty(m, dtype=np.int64)
    k_s, k_a = n, n + n_slack
    art_cols = []
    for i, s in enumerate(senses):
        if s == LE:
            S[i, k_s] = 1.0
            basis[i] = k_s
            k_s += 1
        else:
            if s == GE:
                S[i, k_s] = -1.0
                k_s += 1
            S[i, k_a] = 1.0
            basis[i] = k_a
            art_cols.append(k_a)
            k_a += 1

    T = np.zeros((m + 1, N + 1))
    T[:m, :N] = S
    T[:m, -1] = bs
    real_cols = np.arange(n + n_slack)

    if art_cols:
        # phase 1: maximize -sum(artificials)
        T[m, art_cols] = 1.0
        for i in range(m):
            if basis[i] >= n + n_slack:
                T[m] -= T[i]
        status = _run(T, basis, m, np.arange(N), pivot_tol)
        if status != "optimal":
            raise LpNumericalError("phase 1 did not terminate at an optimum")
        if -T[m, -1] > feas_tol * max(1.0, float(np.abs(bs).max(initial=0.0))):
            return LpSolution("infeasible", np.full(n, np.nan), np.full(m, np.nan), float("nan"))
        # drive zero-level artificials out of the basis where possible
        for i in range(m):
            if basis[i] >= n + n_slack:
                nz = np.flatnonzero(np.abs(T[i, real_cols]) > pivot_tol)
                if nz.size:
                    j = int(real_cols[nz[0]])
                    _pivot(T, i, j)
                    basis[i] = j

    # phase 2
    cost = np.zeros(N)
    cost[:n] = c
    T[m] = 0.0
    T[m, :N] = -cost
    for i in range(m):
        T[m] += cost[basis[i]] * T[i]
    status = _run(T, basis, m, real_cols, pivot_tol)
    if status == "unbounded":
        return LpSolution("unbounded", np.full(n, np.nan), np.full(m, np.nan), float("inf"))

    B = S[:, basis]
    try:
        xb = np.linalg.solve(B, bs)
        y = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError as exc:  # pragma: no cover - singular basis means a bug
        raise LpNumericalError("singular final basis") from exc
    xfull = np.zeros(N)
    xfull[basis] = xb
    x = np.maximum(xfull[:n], 0.0)
    y = y * sign
    value = float(c @ x)
    _certify(problem, x, y, value, feas_tol, gap_tol)
    return LpSolution("optimal", x, y, value)


def _certify(problem: LpProblem, x, y, value, feas_tol, gap_tol):
    A, b, c = problem.A, problem.b, problem.c
    ax = A @ x
    scale = np.maximum(1.0, np.abs(b))
    tol = np.maximum(feas_tol, 1e-12 * np.abs(A) @ np.abs(x))
    for i, s in enumerate(problem.senses):
        r = ax[i] - b[i]
        if (s == LE and r > tol[i]) or (s == GE and r < -tol[i]) or (s == EQ and abs(r) > tol[i]):
            raise LpNumericalError(f"primal residual {r:.3e} on row {i}")
        ytol = 1e-9 * scale[i]
        if (s == LE and y[i] < -ytol) or (s == GE and y[i] > ytol):
            raise LpNumericalError(f"dual sign violated on row {i}")
    reduced = A.T @ y - c
    dtol = 1e-9 * np.maximum(1.0, np.abs(A).T @ np.abs(y))
    if (reduced < -dtol).any():
        raise LpNumericalError("dual infeasible final basis")
    dual_value = float(b @ y)
    if abs(value - dual_value) > gap_tol * max(1.0, abs(value)):
        raise LpNumericalError(f"duality gap {abs(value - dual_value):.3e}")


def duality_gap(problem: LpProblem, sol: LpSolution) -> float:
    return abs(float(problem.c @ sol.primal) - float(problem.b @ sol.dual))


def max_violation(problem: LpProblem, x: np.ndarray) -> float:
    """Largest constraint violation (including ``x >= 0``) of a candidate point."""
    r = problem.A @ x - problem.b
    worst = max(0.0, float(-x.min(initial=0.0)))
    for ri, s in zip(r, problem.senses):
        v = ri if s == LE else (-ri if s == GE else abs(ri))
        worst = max(worst, float(v))
    return worst


def build(c: Sequence[float], rows: Sequence[tuple[Sequence[float], str, float]]) -> LpProblem:
    """Convenience constructor from ``(coefficients, sense, rhs)`` rows."""
    A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), len(c))
    return LpProblem(np.asarray(c, dtype=float), A, tuple(r[1] for r in rows), np.array([r[2] for r in rows], dtype=float))
