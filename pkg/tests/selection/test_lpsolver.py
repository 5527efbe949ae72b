import itertools

import numpy as np
import pytest

from src.core.errors import LpError
from src.core.rng import make_rng
from src.selection.lpsolver import LinearProgram, LpStatus, equilibrate, solve_lp


def _vertex_optimum(c, A, b):
    """Brute-force min c'w over the vertices of {A w <= b, w >= 0}."""
    k = len(c)
    G = np.vstack([A, -np.eye(k)])
    h = np.concatenate([b, np.zeros(k)])
    best = np.inf
    for rows in itertools.combinations(range(G.shape[0]), k):
        sub = G[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        w = np.linalg.solve(sub, h[list(rows)])
        if np.all(G @ w <= h + 1e-9):
            best = min(best, float(c @ w))
    return best


def _random_bounded_lp(rng):
    k = int(rng.integers(1, 5))
    m = int(rng.integers(1, 5))
    A = rng.uniform(-1.0, 1.0, (m, k))
    w0 = rng.uniform(0.0, 1.0, k)
    b = A @ w0 + rng.uniform(0.0, 1.0, m)
    # box rows keep the feasible set bounded
    A = np.vstack([A, np.eye(k)])
    b = np.concatenate([b, np.full(k, 3.0)])
    c = rng.uniform(-1.0, 1.0, k)
    return c, A, b


class TestLinearProgram:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="A_ub"):
            LinearProgram(c=np.ones(2), A_ub=np.ones((3, 3)), b_ub=np.ones(3))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            LinearProgram(c=np.array([np.inf]), A_ub=np.ones((1, 1)), b_ub=np.ones(1))

    def test_empty_constraints(self):
        lp = LinearProgram(c=np.ones(2), A_ub=np.zeros((0, 2)), b_ub=np.zeros(0))
        assert (lp.n_vars, lp.n_constraints) == (2, 0)


class TestSolveLp:
    def test_covering_constraint(self):
        # w1 + w2 >= 1 written as -w1 - w2 <= -1
        sol = solve_lp(LinearProgram(c=np.ones(2), A_ub=np.array([[-1.0, -1.0]]), b_ub=np.array([-1.0])))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective == pytest.approx(1.0, abs=1e-10)
        assert sol.w.sum() == pytest.approx(1.0, abs=1e-10)

    def test_infeasible(self):
        sol = solve_lp(LinearProgram(c=np.ones(1), A_ub=np.zeros((1, 1)), b_ub=np.array([-1.0])))
        assert sol.status is LpStatus.INFEASIBLE
        assert sol.w is None

    def test_unbounded(self):
        sol = solve_lp(LinearProgram(c=np.array([-1.0]), A_ub=np.zeros((0, 1)), b_ub=np.zeros(0)))
        assert sol.status is LpStatus.UNBOUNDED

    def test_iteration_limit(self):
        A = np.array([[1.0, 1.0], [1.0, -1.0]])
        sol = solve_lp(LinearProgram(c=np.array([-1.0, -2.0]), A_ub=A, b_ub=np.array([4.0, 1.0])), max_iter=0)
        assert sol.status is LpStatus.ITER_LIMIT

    def test_require_optimal_raises_on_other_status(self):
        sol = solve_lp(LinearProgram(c=np.ones(1), A_ub=np.zeros((1, 1)), b_ub=np.array([-1.0])))
        with pytest.raises(LpError, match="infeasible"):
            sol.require_optimal()

    def test_require_optimal_returns_solution(self):
        sol = solve_lp(LinearProgram(c=np.ones(1), A_ub=np.array([[-1.0]]), b_ub=np.array([-1.0])))
        assert sol.require_optimal() is sol

    def test_free_variables(self):
        # min w subject to w >= -2 with w free
        sol = solve_lp(LinearProgram(c=np.array([1.0]), A_ub=np.array([[-1.0]]), b_ub=np.array([2.0]), nonneg=False))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.w[0] == pytest.approx(-2.0)

    def test_tolerance_must_be_positive(self):
        with pytest.raises(ValueError, match="tol"):
            solve_lp(LinearProgram(c=np.ones(1), A_ub=np.ones((1, 1)), b_ub=np.ones(1)), tol=0.0)

    def test_degenerate_problem_terminates(self):
        # several constraints tight at the origin
        A = np.array([[1.0, -1.0], [-1.0, 1.0], [1.0, 1.0], [2.0, 1.0]])
        b = np.array([0.0, 0.0, 2.0, 3.0])
        sol = solve_lp(LinearProgram(c=np.array([-1.0, -1.0]), A_ub=A, b_ub=b))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective == pytest.approx(-2.0)

    def test_matches_vertex_enumeration(self):
        rng = make_rng(314)
        for _ in range(200):
            c, A, b = _random_bounded_lp(rng)
            sol = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b))
            assert sol.status is LpStatus.OPTIMAL
            assert sol.objective == pytest.approx(_vertex_optimum(c, A, b), abs=1e-8)
            assert np.all(A @ sol.w <= b + 1e-9)
            assert np.all(sol.w >= 0)

    def test_strong_duality(self):
        rng = make_rng(2718)
        for _ in range(50):
            c, A, b = _random_bounded_lp(rng)
            sol = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b))
            assert sol.dual_objective == pytest.approx(sol.objective, abs=1e-8)
            assert np.all(sol.dual <= 1e-9)
            # dual feasibility: A'y <= c
            assert np.all(A.T @ sol.dual <= c + 1e-8)

    def test_negative_rhs_needs_phase_one(self):
        A = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
        b = np.array([-1.0, -2.0, 10.0])
        sol = solve_lp(LinearProgram(c=np.array([1.0, 3.0]), A_ub=A, b_ub=b))
        assert sol.status is LpStatus.OPTIMAL
        np.testing.assert_allclose(sol.w, [1.0, 2.0], atol=1e-10)
        assert sol.iterations > 0

    def test_badly_scaled_rows_and_columns(self):
        rng = make_rng(1618)
        for _ in range(50):
            c, A, b = _random_bounded_lp(rng)
            rows = 10.0 ** rng.uniform(-4.0, 4.0, A.shape[0])
            cols = 10.0 ** rng.uniform(-4.0, 4.0, A.shape[1])
            # w = cols * w' leaves the objective unchanged
            sol = solve_lp(LinearProgram(c=c * cols, A_ub=rows[:, None] * A * cols, b_ub=rows * b))
            assert sol.status is LpStatus.OPTIMAL
            expected = _vertex_optimum(c, A, b)
            assert sol.objective == pytest.approx(expected, rel=1e-7, abs=1e-8)

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="method"):
            solve_lp(LinearProgram(c=np.ones(1), A_ub=np.ones((1, 1)), b_ub=np.ones(1)), method="interior")


class TestEquilibrate:
    def test_powers_of_two_and_unit_columns(self):
        rng = make_rng(55)
        A = rng.standard_normal((6, 4)) * 10.0 ** rng.uniform(-5.0, 5.0, (6, 1))
        row, col = equilibrate(A)
        for factor in np.concatenate([row, col]):
            assert np.log2(factor) == pytest.approx(round(np.log2(factor)))
        scaled = np.abs(row[:, None] * A * col)
        assert scaled.max() <= 2.0
        assert np.all(scaled.max(axis=0) >= 0.5)

    def test_zero_rows_keep_unit_factor(self):
        A = np.array([[0.0, 0.0], [4.0, 0.5]])
        row, col = equilibrate(A)
        assert row[0] == 1.0

    def test_empty(self):
        row, col = equilibrate(np.zeros((0, 3)))
        np.testing.assert_array_equal(col, np.ones(3))
        assert row.shape == (0,)


class TestHighsBackend:
    def test_matches_simplex(self):
        rng = make_rng(4242)
        for _ in range(30):
            c, A, b = _random_bounded_lp(rng)
            lp = LinearProgram(c=c, A_ub=A, b_ub=b)
            ours = solve_lp(lp)
            highs = solve_lp(lp, method="highs")
            assert highs.status is LpStatus.OPTIMAL
            assert highs.objective == pytest.approx(ours.objective, abs=1e-8)
            assert highs.dual_objective == pytest.approx(highs.objective, abs=1e-7)

    def test_reports_infeasible(self):
        sol = solve_lp(LinearProgram(c=np.ones(1), A_ub=np.zeros((1, 1)), b_ub=np.array([-1.0])), method="highs")
        assert sol.status is LpStatus.INFEASIBLE
        with pytest.raises(LpError, match="infeasible"):
            sol.require_optimal()

    def test_free_variables(self):
        lp = LinearProgram(c=np.array([1.0]), A_ub=np.array([[-1.0]]), b_ub=np.array([2.0]), nonneg=False)
        assert solve_lp(lp, method="highs").w[0] == pytest.approx(-2.0)
