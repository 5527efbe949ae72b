#!/usr/bin/env python3
"""Desk-scale acceptance checks for the estimation pipeline.

Runs LP and Dantzig oracle comparisons, the residual orthogonality,
root-n and normality checks of the partially linear fit, the Monte Carlo
orderings on the weakly correlated type I design and on a screened
ultra-high dimensional design, the instrument algebra and the
determinism of the table output. Each check prints PASS/FAIL with its
measured numbers.

Usage:
    python scripts/acceptance.py                 # every check
    python scripts/acceptance.py --only lp mc    # selected checks
    python scripts/acceptance.py --quick         # fewer repetitions
"""
import argparse
import itertools
import sys
import time
from pathlib import Path

import numpy as np
from scipy.stats import shapiro

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.bench.experiment import run_experiment
from src.bench.report import emit_table
from src.core.config import experiment_from_dict
from src.core.rng import make_rng
from src.correction.instruments import compute_A_eigen, omega_from_cross_moments, plan_instruments
from src.correction.kernel import UNDERSMOOTH_SCALE, KernelSpec, bandwidth_rule
from src.correction.plm import fit_plm
from src.datamodel.generator import make_toeplitz_cov
from src.selection.dantzig import dantzig_select
from src.selection.lpsolver import LinearProgram, LpStatus, solve_lp


def _vertex_optimum(c, A, b):
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


def check_lp(quick: bool) -> tuple[bool, str]:
    rng = make_rng(101)
    count = 100 if quick else 500
    worst = 0.0
    for _ in range(count):
        k, m = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        A = rng.uniform(-1.0, 1.0, (m, k))
        b = A @ rng.uniform(0.0, 1.0, k) + rng.uniform(0.0, 1.0, m)
        A = np.vstack([A, np.eye(k)])
        b = np.concatenate([b, np.full(k, 3.0)])
        c = rng.uniform(-1.0, 1.0, k)
        sol = solve_lp(LinearProgram(c=c, A_ub=A, b_ub=b))
        if sol.status is not LpStatus.OPTIMAL:
            return False, f"status {sol.status.value} on a bounded feasible LP"
        worst = max(worst, abs(sol.objective - _vertex_optimum(c, A, b)))
    return worst <= 1e-8, f"{count} LPs, max |objective gap| = {worst:.2e}"


def check_soft_threshold(quick: bool) -> tuple[bool, str]:
    rng = make_rng(102)
    designs = 20 if quick else 100
    worst = 0.0
    for _ in range(designs):
        n = int(rng.integers(10, 51))
        p = int(rng.integers(1, min(n, 20) + 1))
        X, _ = np.linalg.qr(rng.standard_normal((n, p)))
        Y = X @ rng.normal(0.0, 2.0, p) + 0.3 * rng.standard_normal(n)
        z = X.T @ Y
        for lam in rng.uniform(0.0, 1.2 * np.abs(z).max(), 5):
            beta = dantzig_select(X, Y, float(lam), 1.0)
            expected = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
            worst = max(worst, float(np.abs(beta - expected).max()))
    return worst <= 1e-6, f"{designs} designs x 5 lambdas, max coordinate gap = {worst:.2e}"


def check_residual_orthogonality(quick: bool) -> tuple[bool, str]:
    reps = 20 if quick else 100
    n, p, q = 5000, 8, 3
    beta = np.array([1.0, -0.5, 0.8, 0.3, 0.2, -0.25, 0.15, 0.1])
    L = np.linalg.cholesky(make_toeplitz_cov(0.3, p))
    passed = 0
    for rep in range(reps):
        rng = make_rng(103, rep)
        X = rng.standard_normal((n, p)) @ L.T
        Y = X @ beta + 0.5 * rng.standard_normal(n)
        Z, U = X[:, :q], X[:, q:]
        theta_ols, *_ = np.linalg.lstsq(Z, Y, rcond=None)
        plan = plan_instruments(Z, U, beta[q:], residual=Y - Z @ theta_ols)
        stds = plan.V.std(axis=0, ddof=1)
        kernel = KernelSpec(
            bandwidth=bandwidth_rule(n, 1, scale=UNDERSMOOTH_SCALE), dim=2, scales=tuple(stds)
        )
        fit = fit_plm(Z, Y, plan.V, kernel)
        xi = Y - Z @ fit.theta_hat - fit.g_values
        design = np.column_stack([np.ones(n), Z, plan.V])
        coef, *_ = np.linalg.lstsq(design, xi, rcond=None)
        resid = xi - design @ coef
        s2 = resid @ resid / (n - design.shape[1])
        se = np.sqrt(np.diag(s2 * np.linalg.inv(design.T @ design)))
        if np.all(np.abs(coef[1:]) <= 3 * se[1:]):
            passed += 1
    share = passed / reps
    return share >= 0.95, f"all slopes within 3 SE in {passed}/{reps} replications"


def check_root_n(quick: bool) -> tuple[bool, str]:
    reps = 50 if quick else 200
    theta = np.array([1.0, -0.5])
    errors = []
    for n in (100, 200, 400):
        total = 0.0
        for rep in range(reps):
            rng = make_rng(104, n, rep)
            V = rng.uniform(0.0, 3.0, (n, 1))
            Z = np.column_stack([V[:, 0] + rng.standard_normal(n), rng.standard_normal(n)])
            Y = Z @ theta + np.sin(2 * V[:, 0]) + 0.5 * rng.standard_normal(n)
            fit = fit_plm(Z, Y, V, KernelSpec(bandwidth=bandwidth_rule(n, 0), dim=1))
            total += float(np.sum((fit.theta_hat - theta) ** 2))
        errors.append(total / reps)
    ratios = [errors[1] / errors[0], errors[2] / errors[1]]
    ok = all(0.33 <= r <= 0.75 for r in ratios)
    return ok, f"mean squared errors {np.round(errors, 5).tolist()}, ratios {np.round(ratios, 3).tolist()}"


def check_normality(quick: bool) -> tuple[bool, str]:
    reps = 200 if quick else 500
    n = 400
    theta = np.array([1.0, -0.5])
    draws = np.empty(reps)
    for rep in range(reps):
        rng = make_rng(109, rep)
        V = rng.uniform(0.0, 3.0, (n, 1))
        Z = np.column_stack([V[:, 0] + rng.standard_normal(n), rng.standard_normal(n)])
        Y = Z @ theta + np.sin(2 * V[:, 0]) + 0.5 * rng.standard_normal(n)
        fit = fit_plm(Z, Y, V, KernelSpec(bandwidth=bandwidth_rule(n, 0), dim=1))
        draws[rep] = np.sqrt(n) * (fit.theta_hat[0] - theta[0])
    _, p_value = shapiro(draws)
    return p_value > 0.01, f"{reps} draws of sqrt(n)(theta_hat - theta), Shapiro-Wilk p = {p_value:.3f}"


def check_monte_carlo(quick: bool, parallel: int) -> tuple[bool, str]:
    config = experiment_from_dict({
        "id": "type-I-0.98", "n": 50, "p": 100, "beta_type": "I", "rho_corr": 0.1,
        "target_r2": 0.98, "reps": 40 if quick else 200, "seed": 2024,
        "correction": {"standardize_v": True},
    })
    report = run_experiment(config, parallel=parallel)
    agg = report.aggregates()
    ok_reps = len(report.successes)
    mse_ok = agg["mse_hat"] <= 0.02 and agg["mse_S"] >= 5 * agg["mse_hat"]
    tau_ok = report.tau >= 0.95 * report.reps
    order_ok = agg["pe_full"] < agg["pe_sub"] < agg["pe_ols"] and agg["pe_ols"] >= 3 * agg["pe_full"]
    detail = (
        f"MSE {agg['mse_hat']:.4f} vs {agg['mse_S']:.4f}; PE {agg['pe_full']:.4f} < "
        f"{agg['pe_sub']:.4f} < {agg['pe_ols']:.4f}; tau {report.tau}/{report.reps} ({ok_reps} ok)"
    )
    return mse_ok and tau_ok and order_ok, detail


def check_screened(quick: bool, parallel: int) -> tuple[bool, str]:
    config = experiment_from_dict({
        "id": "screened", "n": 100, "p": 500, "rho_corr": 0.1, "sigma_eps": 1.0,
        "use_sis": True, "reps": 15 if quick else 50, "seed": 2027,
        "beta_type": "custom",
        "coefficients": {
            "beta_I": [1.0, -1.5, 2.0, 1.1, -3.0, 1.2, 1.8, -2.5, -2.0, 1.0],
            "I": list(range(1, 11)),
        },
    })
    report = run_experiment(config, parallel=parallel)
    better = sum(1 for r in report.successes if r.mse_hat < r.mse_S)
    ok = report.failures <= 0.1 * report.reps and better >= 0.8 * len(report.successes)
    return ok, f"{report.failures} failures; MSE improved in {better}/{len(report.successes)} reps"


def check_instrument_algebra(quick: bool) -> tuple[bool, str]:
    rng = make_rng(108)
    worst_orth = worst_resid = 0.0
    for _ in range(100):
        l, k = int(rng.integers(3, 9)), int(rng.integers(2, 6))
        d = int(rng.integers(1, k + 1))
        C = rng.standard_normal((l, d)) @ rng.standard_normal((d, k))
        A = compute_A_eigen(omega_from_cross_moments(C, d))
        worst_orth = max(worst_orth, float(np.abs(A @ A.T - np.eye(d)).max()))
        z = rng.standard_normal(k)
        projected = A.T @ np.linalg.solve(A @ A.T, A @ z)
        worst_resid = max(worst_resid, float(np.abs(C @ (z - projected)).max()))
    ok = worst_orth <= 1e-10 and worst_resid <= 1e-8
    return ok, f"max |AA' - I| = {worst_orth:.2e}, max residual moment = {worst_resid:.2e}"


def check_determinism(quick: bool, parallel: int) -> tuple[bool, str]:
    config = experiment_from_dict({
        "id": "determinism", "n": 50, "p": 100, "beta_type": "I", "rho_corr": 0.1,
        "target_r2": 0.9, "reps": 6 if quick else 20, "seed": 9,
    })
    serial = emit_table([run_experiment(config)])
    pooled = emit_table([run_experiment(config, parallel=max(parallel, 2))])
    return serial == pooled, f"{len(serial.encode())} bytes, identical={serial == pooled}"


CHECKS = {
    "lp": lambda a: check_lp(a.quick),
    "soft-threshold": lambda a: check_soft_threshold(a.quick),
    "orthogonality": lambda a: check_residual_orthogonality(a.quick),
    "root-n": lambda a: check_root_n(a.quick),
    "normality": lambda a: check_normality(a.quick),
    "mc": lambda a: check_monte_carlo(a.quick, a.parallel),
    "screened": lambda a: check_screened(a.quick, a.parallel),
    "instruments": lambda a: check_instrument_algebra(a.quick),
    "determinism": lambda a: check_determinism(a.quick, a.parallel),
}


def main():
    parser = argparse.ArgumentParser(description="Run the acceptance checks")
    parser.add_argument("--only", nargs="+", choices=sorted(CHECKS), help="Checks to run")
    parser.add_argument("--quick", action="store_true", help="Fewer repetitions per check")
    parser.add_argument("--parallel", type=int, default=1, help="Worker processes for Monte Carlo checks")
    args = parser.parse_args()

    names = args.only or list(CHECKS)
    failed = []
    print("=" * 70)
    for name in names:
        start = time.perf_counter()
        ok, detail = CHECKS[name](args)
        elapsed = time.perf_counter() - start
        print(f"{'PASS' if ok else 'FAIL'}  {name:<15} {elapsed:7.1f}s  {detail}")
        if not ok:
            failed.append(name)
    print("=" * 70)
    if failed:
        print(f"Failed: {', '.join(failed)}")
        sys.exit(1)
    print(f"All {len(names)} checks passed")


if __name__ == "__main__":
    main()
