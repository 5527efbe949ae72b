"""Dantzig selector, the Gaussian-supremum rule for lambda_p and the
Gaussian Dantzig two-stage refit.

The selector minimises ||beta||_1 subject to
||X'(Y - X beta)||_inf <= lambda_p * sigma, solved as an LP over
beta = u - v with u, v >= 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from src.core.errors import DantzigError, LpError
from src.core.rng import make_rng
from src.selection.lpsolver import LinearProgram, solve_lp

logger = logging.getLogger(__name__)

# Dense simplex size guard; larger problems should be screened first
MAX_LP_DIM = 3000
DEFAULT_VARSIGMA = 1e-4
DEFAULT_LAMBDA_M = 10
_FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DantzigFit:
    """Dantzig estimate, its tuning and the least-squares refit on the active set."""

    beta_tilde: np.ndarray
    lambda_p: float
    sigma: float
    active: tuple[int, ...]
    theta_tilde_S: np.ndarray
    varsigma: float = DEFAULT_VARSIGMA
    max_slack: float = 0.0

    @property
    def residual_bound(self) -> float:
        return self.lambda_p * self.sigma

    def full_theta(self, p: int | None = None) -> np.ndarray:
        """theta_tilde_S embedded in a p-vector, zeros off the active set."""
        p = self.beta_tilde.shape[0] if p is None else p
        full = np.zeros(p)
        full[list(self.active)] = self.theta_tilde_S
        return full

    def embed(self, kept, p: int) -> DantzigFit:
        """Map a fit made on the columns ``kept`` back to all p covariates."""
        kept = np.asarray(kept, dtype=int)
        if kept.shape[0] != self.beta_tilde.shape[0]:
            raise ValueError(f"{kept.shape[0]} kept columns for a fit on {self.beta_tilde.shape[0]}")
        beta = np.zeros(p)
        beta[kept] = self.beta_tilde
        return replace(self, beta_tilde=beta, active=tuple(int(kept[j]) for j in self.active))


def constraint_slack(X: np.ndarray, Y: np.ndarray, beta: np.ndarray, bound: float) -> float:
    """max_j |x_j'(Y - X beta)| - bound (<= 0 when beta is feasible)."""
    if X.shape[1] == 0:
        return -bound
    return float(np.abs(X.T @ (Y - X @ beta)).max()) - bound


def select_lambda_gaussian(X: np.ndarray, m: int = DEFAULT_LAMBDA_M, seed: int = 0) -> float:
    """Empirical maximum of |X'z|_j over m draws of z ~ N(0, I_n)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    X = np.asarray(X, dtype=float)
    z = make_rng(seed).standard_normal((X.shape[0], m))
    if X.size == 0:
        return 0.0
    lam = float(np.abs(X.T @ z).max())
    logger.debug("lambda_p from %d Gaussian draws: %.6g", m, lam)
    return lam


def dantzig_select(
    X: np.ndarray,
    Y: np.ndarray,
    lambda_p: float,
    sigma: float,
    tol: float = 1e-9,
) -> np.ndarray:
    """Return the minimum-l1 coefficient vector satisfying the Dantzig constraint.

    Args:
        X: n x p covariate matrix.
        Y: response vector of length n.
        lambda_p: Shrinkage tuning parameter (>= 0).
        sigma: Noise level (>= 0); the bound is lambda_p * sigma.
        tol: Simplex tolerance.

    Returns:
        The p-vector beta_tilde.

    Raises:
        DantzigError: If p exceeds MAX_LP_DIM or the LP does not end
            optimal with either the tableau simplex or HiGHS.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    if Y.shape != (n,):
        raise ValueError(f"Y must have length {n}, got shape {Y.shape}")
    if lambda_p < 0 or sigma < 0:
        raise ValueError("lambda_p and sigma must be >= 0")
    if p > MAX_LP_DIM:
        raise DantzigError(
            f"p = {p} exceeds the dense LP limit of {MAX_LP_DIM}; screen variables with SIS first"
        )

    bound = float(lambda_p * sigma)
    XtY = X.T @ Y
    if p == 0 or bound >= np.abs(XtY).max():
        logger.debug("dantzig_select: bound %.6g covers ||X'Y||_inf, returning zero", bound)
        return np.zeros(p)

    G = X.T @ X
    # X'(Y - X(u - v)) <= bound  and  -X'(Y - X(u - v)) <= bound
    A_ub = np.block([[-G, G], [G, -G]])
    b_ub = np.concatenate([bound - XtY, bound + XtY])
    lp = LinearProgram(c=np.ones(2 * p), A_ub=A_ub, b_ub=b_ub)
    try:
        solution = solve_lp(lp, tol=tol).require_optimal()
    except LpError as exc:
        logger.warning("dantzig_select: %s; retrying with the HiGHS dual simplex", exc)
        try:
            solution = solve_lp(lp, tol=tol, method="highs").require_optimal()
        except LpError as retry_exc:
            raise DantzigError(f"Dantzig LP failed: {exc}; HiGHS: {retry_exc}") from retry_exc

    beta = solution.w[:p] - solution.w[p:]
    slack = constraint_slack(X, Y, beta, bound)
    if slack > _FEASIBILITY_TOL * max(1.0, bound):
        logger.warning("dantzig_select: constraint violated by %.3g after LP solve", slack)
    logger.debug(
        "dantzig_select: n=%d p=%d bound=%.6g nonzeros=%d l1=%.6g pivots=%d",
        n, p, bound, int(np.count_nonzero(beta)), float(np.abs(beta).sum()), solution.iterations,
    )
    return beta


def gaussian_dantzig(
    X: np.ndarray,
    Y: np.ndarray,
    beta_tilde: np.ndarray,
    varsigma: float,
    sigma: float,
) -> tuple[tuple[int, ...], np.ndarray]:
    """Threshold beta_tilde at varsigma * sigma and refit OLS on the survivors.

    Returns:
        (active, theta_tilde_S) with 0-based active indices in ascending
        order.

    Raises:
        DantzigError: If nothing survives the threshold, more columns than
            rows survive, or the selected columns are rank deficient.
    """
    X = np.asarray(X, dtype=float)
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    active = tuple(int(j) for j in np.flatnonzero(np.abs(beta_tilde) > varsigma * sigma))
    if not active:
        raise DantzigError("no variables selected; lower varsigma or lambda_p")
    if len(active) > X.shape[0]:
        raise DantzigError(f"{len(active)} variables selected but only n = {X.shape[0]} observations")
    Xa = X[:, list(active)]
    if np.linalg.matrix_rank(Xa) < len(active):
        raise DantzigError(f"selected columns {active} are rank deficient")
    theta, *_ = np.linalg.lstsq(Xa, Y, rcond=None)
    logger.debug("gaussian_dantzig: active=%s", active)
    return active, theta


def fit_dantzig(
    X: np.ndarray,
    Y: np.ndarray,
    sigma: float,
    *,
    lambda_p: float | None = None,
    m: int = DEFAULT_LAMBDA_M,
    varsigma: float = DEFAULT_VARSIGMA,
    seed: int = 0,
    tol: float = 1e-9,
    center: bool = False,
) -> DantzigFit:
    """Run lambda selection (unless fixed), Dantzig selection and the refit.

    With ``center`` the selection step (lambda_p and the LP) sees column-centred
    X and centred Y, so a common mean shift in the covariates does not
    enter the constraint. The threshold-and-refit step always uses the raw
    data.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Xs, Ys = (X - X.mean(axis=0), Y - Y.mean()) if center else (X, Y)
    if lambda_p is None:
        lambda_p = select_lambda_gaussian(Xs, m=m, seed=seed)
    beta = dantzig_select(Xs, Ys, lambda_p, sigma, tol=tol)
    active, theta = gaussian_dantzig(X, Y, beta, varsigma, sigma)
    return DantzigFit(
        beta_tilde=beta,
        lambda_p=float(lambda_p),
        sigma=float(sigma),
        active=active,
        theta_tilde_S=theta,
        varsigma=varsigma,
        max_slack=constraint_slack(Xs, Ys, beta, lambda_p * sigma),
    )
