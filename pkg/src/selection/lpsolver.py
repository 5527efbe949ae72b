"""Dense two-phase simplex for ``min c'w  s.t.  A_ub w <= b_ub, w >= 0``.

Rows and columns are equilibrated (by powers of two, so the scaled problem
is exact) before the tableau is built, which keeps every tolerance
relative to entries of order one. The entering column is the one with the
most negative reduced cost; after a run of degenerate pivots the solver
switches to Bland's rule (lowest-index entering column, lowest basic index
among ratio ties) until the objective moves again, so degenerate problems
terminate. Every ``_REFACTOR_EVERY`` pivots, and once more before
optimality is declared, the tableau is recomputed from the original rows
and the current basis.

Rows with a negative right-hand side are sign-flipped and get an
artificial variable; phase 1 minimises the sum of artificials, phase 2 the
real objective.

Tableau layout: ``[structural | slack | artificial | rhs]``; the last row
holds reduced costs and ``-objective`` in its last cell.

``method="highs"`` hands the same problem to the HiGHS dual simplex
shipped with scipy.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.optimize import linprog

from src.core.errors import LpError
from src.core.log_setup import TRACE

logger = logging.getLogger(__name__)

METHODS = ("simplex", "highs")

# Phase 1 residual above this (relative to max|b| after scaling) means an empty feasible set
_INFEASIBLE_TOL = 1e-7
# Column entries below this fraction of the column's largest entry never pivot
_PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 50
# Consecutive degenerate pivots before Bland's rule takes over
_DEGENERATE_RUN = 20
_EQUILIBRATION_PASSES = 4


class LpStatus(Enum):
    """Termination status of the simplex solver."""

    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITER_LIMIT = "iter_limit"


_HIGHS_STATUS = {
    0: LpStatus.OPTIMAL,
    1: LpStatus.ITER_LIMIT,
    2: LpStatus.INFEASIBLE,
    3: LpStatus.UNBOUNDED,
}


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """Minimise c'w subject to A_ub w <= b_ub (and w >= 0 when ``nonneg``)."""

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    nonneg: bool = True

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float).ravel()
        b = np.asarray(self.b_ub, dtype=float).ravel()
        A = np.asarray(self.A_ub, dtype=float)
        if A.size == 0:
            A = A.reshape(b.shape[0], c.shape[0])
        if A.ndim != 2 or A.shape != (b.shape[0], c.shape[0]):
            raise ValueError(
                f"A_ub must have shape ({b.shape[0]}, {c.shape[0]}), got {A.shape}"
            )
        if not (np.isfinite(c).all() and np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_ub", A)
        object.__setattr__(self, "b_ub", b)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.b_ub.shape[0]


@dataclass(frozen=True, eq=False)
class LpSolution:
    """Result of ``solve_lp``.

    ``dual`` holds the simplex multipliers y of the inequality rows
    (y <= 0 for this minimisation form); at optimality b'y equals the
    objective.
    """

    w: np.ndarray | None
    objective: float | None
    status: LpStatus
    dual: np.ndarray | None = None
    dual_objective: float | None = None
    iterations: int = 0

    def require_optimal(self) -> LpSolution:
        """Return self, or raise LpError naming the status."""
        if self.status is not LpStatus.OPTIMAL:
            raise LpError(f"LP ended with status {self.status.value} after {self.iterations} pivots")
        return self


def equilibrate(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row and column factors (powers of two) bringing every row and column max of |A| near 1.

    The scaled matrix is ``row[:, None] * A * col``; zero rows and columns
    keep the factor 1.
    """
    A = np.asarray(A, dtype=float)
    row = np.ones(A.shape[0])
    col = np.ones(A.shape[1])
    if A.size == 0:
        return row, col
    M = np.abs(A)
    for _ in range(_EQUILIBRATION_PASSES):
        row_max = (M * col).max(axis=1) * row
        row /= np.where(row_max > 0, row_max, 1.0)
        col_max = (M * row[:, None]).max(axis=0) * col
        col /= np.where(col_max > 0, col_max, 1.0)
    return np.exp2(np.round(np.log2(row))), np.exp2(np.round(np.log2(col)))


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    pivot_row = T[row] / T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, pivot_row)
    T[row] = pivot_row


def _clean_rhs(T: np.ndarray, tol: float) -> None:
    # Round-off can push a zero basic value just below zero
    rhs = T[:-1, -1]
    floor = -tol * max(1.0, float(np.abs(rhs).max(initial=0.0)))
    rhs[(rhs < 0.0) & (rhs > floor)] = 0.0


def _refactor(T: np.ndarray, basis: list[int], body0: np.ndarray, cost_row: np.ndarray) -> bool:
    """Rebuild T as B^-1 [rows | rhs] from the original rows; False if B is singular."""
    if not basis:
        return False
    try:
        body = linalg.solve(body0[:, basis], body0)
    except (linalg.LinAlgError, ValueError):
        return False
    if not np.isfinite(body).all():
        return False
    T[:-1] = body
    T[-1] = cost_row - cost_row[basis] @ body
    return True


def _run_simplex(
    T: np.ndarray,
    basis: list[int],
    n_cols: int,
    body0: np.ndarray,
    cost_row: np.ndarray,
    tol: float,
    budget: int,
    phase: int,
) -> tuple[LpStatus, int]:
    """Pivot until optimal, unbounded or out of budget. Mutates T and basis.

    Only the first ``n_cols`` columns may enter the basis.
    """
    opt_tol = tol * max(1.0, float(np.abs(cost_row[:n_cols]).max(initial=0.0)))
    iterations = since_refactor = degenerate = 0
    while True:
        reduced = T[-1, :n_cols]
        entering = np.flatnonzero(reduced < -opt_tol)
        if entering.size == 0:
            if since_refactor and _refactor(T, basis, body0, cost_row):
                since_refactor = 0
                _clean_rhs(T, tol)
                continue
            return LpStatus.OPTIMAL, iterations
        if iterations >= budget:
            return LpStatus.ITER_LIMIT, iterations

        bland = degenerate >= _DEGENERATE_RUN
        col = int(entering[0]) if bland else int(entering[np.argmin(reduced[entering])])
        column = T[:-1, col]
        rows = np.flatnonzero(column > _PIVOT_TOL * max(1.0, float(np.abs(column).max(initial=0.0))))
        if rows.size == 0:
            return LpStatus.UNBOUNDED, iterations
        ratios = np.maximum(T[rows, -1], 0.0) / column[rows]
        best = float(ratios.min())
        tied = rows[ratios <= best + tol * max(1.0, best)]
        if bland:
            row = int(min(tied, key=lambda r: basis[r]))
        else:
            # largest pivot element among the ties
            row = int(tied[np.argmax(column[tied])])
        degenerate = degenerate + 1 if best <= tol else 0

        _pivot(T, row, col)
        basis[row] = col
        iterations += 1
        since_refactor += 1
        if since_refactor >= _REFACTOR_EVERY and _refactor(T, basis, body0, cost_row):
            since_refactor = 0
        _clean_rhs(T, tol)
        logger.log(
            TRACE, "phase %d pivot %d: enter=%d leave_row=%d bland=%s obj=%.10g",
            phase, iterations, col, row, bland, -T[-1, -1],
        )


def _solve_highs(lp: LinearProgram, max_iter: int) -> LpSolution:
    has_rows = lp.n_constraints > 0
    result = linprog(
        lp.c,
        A_ub=lp.A_ub if has_rows else None,
        b_ub=lp.b_ub if has_rows else None,
        bounds=(0, None) if lp.nonneg else (None, None),
        method="highs-ds",
        options={"maxiter": max_iter},
    )
    status = _HIGHS_STATUS.get(result.status)
    iterations = int(getattr(result, "nit", 0))
    if status is None:
        raise LpError(f"HiGHS stopped: {result.message}")
    if status is not LpStatus.OPTIMAL:
        logger.debug("solve_lp[highs]: %s after %d iterations", status.value, iterations)
        return LpSolution(w=None, objective=None, status=status, iterations=iterations)
    w = np.asarray(result.x, dtype=float)
    dual = np.asarray(result.ineqlin.marginals, dtype=float) if has_rows else np.zeros(0)
    objective = float(lp.c @ w)
    logger.debug("solve_lp[highs]: optimal objective=%.10g after %d iterations", objective, iterations)
    return LpSolution(
        w=w,
        objective=objective,
        status=LpStatus.OPTIMAL,
        dual=dual,
        dual_objective=float(lp.b_ub @ dual),
        iterations=iterations,
    )


def solve_lp(
    lp: LinearProgram,
    tol: float = 1e-9,
    max_iter: int | None = None,
    method: str = "simplex",
) -> LpSolution:
    """Solve a dense LP.

    Args:
        lp: The problem.
        tol: Optimality, ratio-tie and zero-cleaning tolerance (> 0),
            relative to the equilibrated data.
        max_iter: Pivot budget shared by both phases; defaults to
            50 * (variables + constraints).
        method: ``simplex`` (this module's tableau method) or ``highs``.

    Returns:
        An LpSolution. ``w``/``objective``/``dual`` are None unless the
        status is OPTIMAL.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if max_iter is None:
        max_iter = 50 * (lp.n_vars + lp.n_constraints)
    if method == "highs":
        return _solve_highs(lp, max_iter)

    c, A, b = lp.c, lp.A_ub, lp.b_ub
    if not lp.nonneg:
        c = np.concatenate([c, -c])
        A = np.hstack([A, -A])
    m, nv = A.shape
    row_scale, col_scale = equilibrate(A)
    A = A * row_scale[:, None] * col_scale
    b = b * row_scale
    c = c * col_scale

    signs = np.where(b < 0, -1.0, 1.0)
    art_rows = np.flatnonzero(signs < 0)
    k = art_rows.size
    n_struct_slack = nv + m
    n_total = n_struct_slack + k

    T = np.zeros((m + 1, n_total + 1))
    T[:m, :nv] = A * signs[:, None]
    T[np.arange(m), nv + np.arange(m)] = signs
    T[:m, -1] = np.abs(b)
    basis = [nv + i for i in range(m)]
    for a, i in enumerate(art_rows):
        T[i, n_struct_slack + a] = 1.0
        basis[i] = n_struct_slack + a
    body0 = T[:m].copy()

    logger.debug("solve_lp: vars=%d rows=%d artificials=%d", nv, m, k)

    iterations = 0
    if k:
        phase1_cost = np.zeros(n_total + 1)
        phase1_cost[n_struct_slack:n_total] = 1.0
        T[-1] = phase1_cost - phase1_cost[basis] @ T[:m]
        status, used = _run_simplex(T, basis, n_total, body0, phase1_cost, tol, max_iter, phase=1)
        iterations += used
        if status is LpStatus.ITER_LIMIT:
            logger.debug("solve_lp: phase 1 hit the pivot limit (%d)", max_iter)
            return LpSolution(w=None, objective=None, status=status, iterations=iterations)
        residual = -T[-1, -1]
        if residual > _INFEASIBLE_TOL * max(1.0, float(np.abs(b).max())):
            logger.debug("solve_lp: infeasible, phase 1 residual %.3g", residual)
            return LpSolution(w=None, objective=None, status=LpStatus.INFEASIBLE, iterations=iterations)

        # Drive artificials still basic at level zero out of the basis; a row
        # with no usable entry is redundant and keeps its artificial at zero
        redundant = 0
        for row, var in enumerate(basis):
            if var < n_struct_slack:
                continue
            entries = np.abs(T[row, :n_struct_slack])
            col = int(np.argmax(entries))
            if entries[col] > tol:
                T[row, -1] = 0.0
                _pivot(T, row, col)
                basis[row] = col
            else:
                redundant += 1
        if redundant:
            logger.debug("solve_lp: %d redundant row(s) keep a zero artificial", redundant)

    cost_row = np.zeros(n_total + 1)
    cost_row[:nv] = c
    T[-1] = cost_row - cost_row[basis] @ T[:m]

    status, used = _run_simplex(
        T, basis, n_struct_slack, body0, cost_row, tol, max_iter - iterations, phase=2
    )
    iterations += used
    if status is not LpStatus.OPTIMAL:
        logger.debug("solve_lp: phase 2 ended %s after %d pivots", status.value, iterations)
        return LpSolution(w=None, objective=None, status=status, iterations=iterations)

    x = np.zeros(n_total)
    x[basis] = T[:-1, -1]
    x[np.abs(x) < tol] = 0.0
    w = x[:nv] * col_scale
    if not lp.nonneg:
        w = w[: lp.n_vars] - w[lp.n_vars:]
    dual = -T[-1, nv:n_struct_slack] * row_scale
    objective = float(lp.c @ w)
    logger.debug("solve_lp: optimal objective=%.10g after %d pivots", objective, iterations)
    return LpSolution(
        w=w,
        objective=objective,
        status=LpStatus.OPTIMAL,
        dual=dual,
        iterations=iterations,
        dual_objective=float(lp.b_ub @ dual),
    )
