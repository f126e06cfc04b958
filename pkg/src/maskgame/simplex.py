"""Dense revised simplex for small and medium linear programs.

Problems are stated as

    minimize    c @ x
    subject to  A[i] @ x  (<=, ==, >=)  b[i]
                x[j] >= 0 unless j is listed in ``free``

and solved with a two-phase revised simplex that keeps an explicit basis
inverse (product-form updates, periodic refactorization). Pricing is Dantzig's
most-negative reduced cost; after a run of degenerate pivots the solver
switches permanently to Bland's smallest-index rule, which cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from maskgame.errors import SolverError

SENSES = ("<=", "==", ">=")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    senses: Sequence[str]
    b: np.ndarray
    free: Sequence[int] = ()

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        self.A = np.asarray(self.A, dtype=np.float64).reshape(-1, self.c.size)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.senses = tuple(self.senses)
        if self.A.shape[0] != self.b.size or len(self.senses) != self.b.size:
            raise ValueError(
                f"inconsistent LP dimensions: A {self.A.shape}, b {self.b.shape}, senses {len(self.senses)}"
            )
        bad = [s for s in self.senses if s not in SENSES]
        if bad:
            raise ValueError(f"unknown constraint sense {bad[0]!r}")
        if any(not 0 <= j < self.c.size for j in self.free):
            raise ValueError("free variable index out of range")

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_rows(self) -> int:
        return self.b.size

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Nonnegative violation of each constraint and each bound at ``x``."""
        Ax = self.A @ x
        viol = np.zeros(self.num_rows)
        s = np.asarray(self.senses)
        viol[s == "<="] = np.maximum(Ax - self.b, 0)[s == "<="]
        viol[s == ">="] = np.maximum(self.b - Ax, 0)[s == ">="]
        viol[s == "=="] = np.abs(Ax - self.b)[s == "=="]
        bounded = np.ones(self.num_vars, dtype=bool)
        bounded[list(self.free)] = False
        return np.concatenate([viol, np.maximum(-x[bounded], 0)])


@dataclass
class LPResult:
    status: str
    value: float
    x: np.ndarray
    duals: np.ndarray = field(repr=False)
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class _Tableau:
    """Standard-form state: A_std x = b_std, x >= 0, with an explicit basis inverse."""

    def __init__(self, A, b, basis, tol, refactor_every=64):
        self.A = A
        self.b = b
        self.basis = np.asarray(basis, dtype=np.intp)
        self.tol = tol
        self.refactor_every = refactor_every
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise SolverError("singular basis during refactorization") from None
        self.xB = self.Binv @ self.b
        self.xB[np.abs(self.xB) < self.tol] = 0.0
        self.since_refactor = 0

    def pivot(self, r, j, u):
        Binv = self.Binv
        piv = u[r]
        row = Binv[r] / piv
        Binv -= np.outer(u, row)
        Binv[r] = row
        theta = self.xB[r] / piv
        self.xB -= theta * u
        self.xB[r] = theta
        self.xB[np.abs(self.xB) < self.tol] = 0.0
        self.basis[r] = j
        self.since_refactor += 1
        if self.since_refactor >= self.refactor_every:
            self.refactor()

    def run(self, c, active, rule, max_iter, degenerate_limit=50):
        """Optimize ``c`` over columns flagged in ``active``. Returns (status, iterations)."""
        tol = self.tol
        bland = rule == "bland"
        degenerate_run = 0
        for it in range(max_iter):
            y = c[self.basis] @ self.Binv
            d = c - y @ self.A
            d[~active] = 0.0
            d[self.basis] = 0.0
            cand = np.flatnonzero(d < -tol)
            if cand.size == 0:
                return OPTIMAL, it
            j = cand[0] if bland else cand[np.argmin(d[cand])]
            u = self.Binv @ self.A[:, j]
            pos = np.flatnonzero(u > tol)
            if pos.size == 0:
                return UNBOUNDED, it
            ratios = self.xB[pos] / u[pos]
            theta = ratios.min()
            ties = pos[ratios <= theta + tol]
            if bland:
                r = ties[np.argmin(self.basis[ties])]
            else:
                r = ties[np.argmax(u[ties])]
            if theta <= tol:
                degenerate_run += 1
                if degenerate_run > degenerate_limit:
                    bland = True
            else:
                degenerate_run = 0
            self.pivot(r, j, u)
        return ITERATION_LIMIT, max_iter


def solve_linear_program(
    lp: LinearProgram,
    backend: str = "simplex",
    pivot_rule: str = "dantzig",
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> LPResult:
    """Solve ``lp`` to optimality.

    Args:
      backend: "simplex" (this module) or "highs" (scipy's HiGHS, if installed).
      pivot_rule: "dantzig" (with automatic Bland fallback) or "bland".

    Returns:
      LPResult with status "optimal", "infeasible", "unbounded" or
      "iteration_limit". ``duals[i]`` is the sensitivity of the optimal value to
      ``b[i]``.
    """
    if backend == "highs":
        return _solve_highs(lp)
    if backend != "simplex":
        raise ValueError(f"unknown LP backend {backend!r}")
    if pivot_rule not in ("dantzig", "bland"):
        raise ValueError(f"unknown pivot rule {pivot_rule!r}")

    nvar, nrow = lp.num_vars, lp.num_rows
    free = sorted(set(lp.free))
    if nrow == 0:
        if np.any(lp.c[[j for j in range(nvar) if j not in free]] < 0) or np.any(lp.c[free] != 0):
            return LPResult(UNBOUNDED, -np.inf, np.zeros(nvar), np.zeros(0))
        return LPResult(OPTIMAL, 0.0, np.zeros(nvar), np.zeros(0))

    # columns: originals | negated copies of free vars | slack/surplus | artificials
    blocks = [lp.A]
    costs = [lp.c]
    if free:
        blocks.append(-lp.A[:, free])
        costs.append(-lp.c[free])
    senses = np.asarray(lp.senses)
    slack_rows = np.flatnonzero(senses != "==")
    S = np.zeros((nrow, slack_rows.size))
    S[slack_rows, np.arange(slack_rows.size)] = np.where(senses[slack_rows] == "<=", 1.0, -1.0)
    blocks.append(S)
    costs.append(np.zeros(slack_rows.size))
    A = np.hstack(blocks)
    c = np.concatenate(costs)
    b = lp.b.copy()
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    n_struct = A.shape[1]
    slack_start = n_struct - slack_rows.size
    basis = np.full(nrow, -1, dtype=np.intp)
    for k, i in enumerate(slack_rows):
        if A[i, slack_start + k] > 0:
            basis[i] = slack_start + k
    need_art = np.flatnonzero(basis < 0)
    Art = np.zeros((nrow, need_art.size))
    Art[need_art, np.arange(need_art.size)] = 1.0
    basis[need_art] = n_struct + np.arange(need_art.size)
    A = np.hstack([A, Art])
    ncol = A.shape[1]
    is_art = np.zeros(ncol, dtype=bool)
    is_art[n_struct:] = True

    scale = max(1.0, np.abs(A).max(), np.abs(b).max())
    if max_iter is None:
        max_iter = 50 * (nrow + ncol)
    tab = _Tableau(A, b, basis, tol * scale)
    iterations = 0

    if need_art.size:
        c1 = is_art.astype(np.float64)
        status, its = tab.run(c1, np.ones(ncol, dtype=bool), pivot_rule, max_iter)
        iterations += its
        if status == ITERATION_LIMIT:
            return LPResult(ITERATION_LIMIT, np.nan, np.full(nvar, np.nan), np.full(nrow, np.nan), iterations)
        infeas = c1[tab.basis] @ tab.xB
        if infeas > 1e-8 * scale:
            return LPResult(INFEASIBLE, np.nan, np.full(nvar, np.nan), np.full(nrow, np.nan), iterations)
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = np.ones(A.shape[0], dtype=bool)
        for r in range(A.shape[0]):
            if not is_art[tab.basis[r]]:
                continue
            row = tab.Binv[r] @ A
            row[is_art] = 0.0
            row[tab.basis] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > 1e-9 * scale:
                tab.pivot(r, j, tab.Binv @ A[:, j])
            else:
                keep[r] = False
        if not keep.all():
            A = A[keep]
            b = b[keep]
            tab = _Tableau(A, b, tab.basis[keep], tol * scale)
        else:
            tab.refactor()
    else:
        keep = np.ones(nrow, dtype=bool)

    c2 = np.concatenate([c, np.zeros(ncol - n_struct)])
    status, its = tab.run(c2, ~is_art, pivot_rule, max_iter)
    iterations += its
    if status != OPTIMAL:
        return LPResult(status, -np.inf if status == UNBOUNDED else np.nan, np.full(nvar, np.nan),
                        np.full(nrow, np.nan), iterations)

    tab.refactor()
    xs = np.zeros(ncol)
    xs[tab.basis] = np.maximum(tab.xB, 0.0)
    x = xs[:nvar].copy()
    if free:
        x[free] -= xs[nvar:nvar + len(free)]
    y_kept = c2[tab.basis] @ tab.Binv
    duals = np.zeros(nrow)
    duals[keep] = y_kept
    duals[flip] *= -1
    return LPResult(OPTIMAL, float(lp.c @ x), x, duals, iterations)


def _solve_highs(lp: LinearProgram) -> LPResult:
    from scipy.optimize import linprog

    senses = np.asarray(lp.senses)
    ub = senses != "=="
    sign = np.where(senses == ">=", -1.0, 1.0)
    A_ub = (lp.A * sign[:, None])[ub]
    b_ub = (lp.b * sign)[ub]
    eq = senses == "=="
    bounds = [(None, None) if j in set(lp.free) else (0, None) for j in range(lp.num_vars)]
    res = linprog(
        lp.c,
        A_ub=A_ub if ub.any() else None,
        b_ub=b_ub if ub.any() else None,
        A_eq=lp.A[eq] if eq.any() else None,
        b_eq=lp.b[eq] if eq.any() else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        return LPResult(INFEASIBLE, np.nan, np.full(lp.num_vars, np.nan), np.full(lp.num_rows, np.nan))
    if res.status == 3:
        return LPResult(UNBOUNDED, -np.inf, np.full(lp.num_vars, np.nan), np.full(lp.num_rows, np.nan))
    if res.status != 0:
        return LPResult(ITERATION_LIMIT, np.nan, np.full(lp.num_vars, np.nan), np.full(lp.num_rows, np.nan))
    duals = np.zeros(lp.num_rows)
    if ub.any():
        duals[ub] = res.ineqlin.marginals * sign[ub]
    if eq.any():
        duals[eq] = res.eqlin.marginals
    return LPResult(OPTIMAL, float(res.fun), res.x, duals, int(res.nit))
