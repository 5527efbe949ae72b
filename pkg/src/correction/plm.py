"""Partially linear estimation Y = theta'Z + g(V) + xi and its predictors.

``fit_plm`` residualises Y and Z on the instrument V with the
Nadaraya-Watson smoother and solves the profiled normal equations;
``fit_post_dantzig`` runs the whole correction after a Dantzig fit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import linalg

from src.core.config import CorrectionConfig
from src.core.errors import PlmError
from src.correction.instruments import InstrumentPlan, plan_instruments
from src.correction.kernel import KernelSpec, bandwidth_rule, estimate_g, nw_residualize
from src.datamodel.models import Dataset, SubmodelSplit
from src.selection.dantzig import DantzigFit

logger = logging.getLogger(__name__)

# Smallest/largest eigenvalue ratio of S_n below which it counts as singular
_SINGULAR_RATIO = 1e-10
# Cross-covariance norm (relative) below which the residual alpha is unusable
_ALPHA_TOL = 1e-12
# Dantzig entries below this (relative to max|beta_tilde|) are LP round-off
_GAMMA_NOISE = 1e-8


class PlmVariant(Enum):
    """Which estimator a PlmFit holds: given or Dantzig alpha, plain or 1/sigma^2 weighted."""

    GIVEN_ALPHA = "given_alpha"
    DANTZIG_ALPHA = "dantzig_alpha"
    HETERO_GIVEN_ALPHA = "hetero_given_alpha"
    HETERO_DANTZIG_ALPHA = "hetero_dantzig_alpha"

    @property
    def weighted(self) -> bool:
        return self in (PlmVariant.HETERO_GIVEN_ALPHA, PlmVariant.HETERO_DANTZIG_ALPHA)

    @classmethod
    def pick(cls, *, dantzig_alpha: bool, weighted: bool) -> PlmVariant:
        if dantzig_alpha:
            return cls.HETERO_DANTZIG_ALPHA if weighted else cls.DANTZIG_ALPHA
        return cls.HETERO_GIVEN_ALPHA if weighted else cls.GIVEN_ALPHA


@dataclass(frozen=True, eq=False)
class PlmFit:
    """Fitted partially linear model together with its training sample.

    ``Y_res``/``Z_res`` are the kernel-residualised response and covariates;
    ``g_values`` is g evaluated at the training instruments.
    """

    theta_hat: np.ndarray
    S_n: np.ndarray
    g_values: np.ndarray
    Y_res: np.ndarray
    Z_res: np.ndarray
    sigma_V2_hat: float
    variant: PlmVariant
    kernel: KernelSpec
    Z: np.ndarray
    Y: np.ndarray
    V: np.ndarray
    plan: InstrumentPlan | None = None
    split: SubmodelSplit | None = None
    alpha_source: str | None = None

    @property
    def q(self) -> int:
        return self.theta_hat.shape[0]

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def g_bar(self) -> float:
        return float(self.g_values.mean())

    @property
    def s_n_eigenvalues(self) -> np.ndarray:
        return np.sort(linalg.eigvalsh(self.S_n))[::-1]

    def standard_errors(self) -> np.ndarray:
        """Plug-in standard errors sqrt(diag(sigma_V^2 S_n^-1) / n)."""
        cov = self.sigma_V2_hat * linalg.inv(self.S_n) / self.n
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))

    def full_theta(self) -> np.ndarray:
        """theta_hat embedded in a p-vector (needs the split)."""
        if self.split is None:
            raise ValueError("fit has no sub-model split")
        full = np.zeros(self.split.p)
        full[list(self.split.idx_Z)] = self.theta_hat
        return full

    def instruments_for(self, X_new: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(Z_new, V_new) for full covariate rows, using the frozen instrument plan."""
        if self.plan is None or self.split is None:
            raise ValueError("fit carries no instrument plan")
        X_new = np.atleast_2d(np.asarray(X_new, dtype=float))
        Z_new = X_new[:, list(self.split.idx_Z)]
        return Z_new, self.plan.transform(Z_new, X_new[:, list(self.split.idx_U)])

    def report(self) -> dict:
        """Summary mapping for YAML fit reports (covariate numbers 1-based)."""
        out = {
            "variant": self.variant.value,
            "n": self.n,
            "theta_hat": self.theta_hat.tolist(),
            "standard_errors": self.standard_errors().tolist(),
            "sigma_V2_hat": self.sigma_V2_hat,
            "bandwidth": self.kernel.bandwidth,
            "kernel_scales": list(self.kernel.scales) if self.kernel.scales else None,
            "effective_bandwidths": list(self.kernel.effective_bandwidths),
            "leave_one_out": self.kernel.leave_one_out,
            "s_n_eigenvalues": self.s_n_eigenvalues.tolist(),
            "alpha_source": self.alpha_source,
        }
        if self.split is not None:
            out["selected"] = [j + 1 for j in self.split.idx_Z]
        if self.plan is not None:
            out["d"] = self.plan.d
            out["instruments"] = self.plan.plan_report(self.split.idx_U if self.split else None)
        return out


def _as_matrix(Z: np.ndarray, n: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.ndim != 2 or Z.shape[0] != n:
        raise ValueError(f"Z must have {n} rows, got shape {Z.shape}")
    return Z


def fit_plm(
    Z: np.ndarray,
    Y: np.ndarray,
    V: np.ndarray,
    kernel: KernelSpec,
    variance: np.ndarray | None = None,
    *,
    variant: PlmVariant | None = None,
) -> PlmFit:
    """Kernel-profiled least squares for theta.

    theta = S_n^-1 (1/n) sum w_i Z~_i Y~_i with S_n = (1/n) sum w_i Z~_i Z~_i'
    and w_i = 1/variance_i (all ones when ``variance`` is None).

    Raises:
        PlmError: If S_n is singular or a kernel sum underflows.
        ValueError: On shape mismatches or non-positive variances.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    Z = _as_matrix(Z, n)
    V = np.asarray(V, dtype=float).reshape(n, -1)
    if V.shape[1] != kernel.dim:
        raise ValueError(f"V has {V.shape[1]} columns but the kernel has dimension {kernel.dim}")
    if variance is None:
        weights = np.ones(n)
    else:
        variance = np.broadcast_to(np.asarray(variance, dtype=float), (n,))
        if np.any(variance <= 0) or not np.isfinite(variance).all():
            raise ValueError("variances must be finite and > 0")
        weights = 1.0 / variance
    if variant is None:
        variant = PlmVariant.pick(dantzig_alpha=False, weighted=variance is not None)

    Y_res = nw_residualize(Y, V, kernel)
    Z_res = nw_residualize(Z, V, kernel)
    Zw = Z_res * weights[:, None]
    S_n = Zw.T @ Z_res / n
    S_n = 0.5 * (S_n + S_n.T)
    eig = linalg.eigvalsh(S_n)
    if eig.max() <= 0 or eig.min() <= _SINGULAR_RATIO * eig.max():
        raise PlmError(
            "identifiability condition violated: lambda_min(S_n) = "
            f"{eig.min():.3g} (lambda_max {eig.max():.3g}); instrument V explains Z completely"
        )
    theta = linalg.solve(S_n, Zw.T @ Y_res / n, assume_a="pos")

    g_values = estimate_g(theta, Z, Y, V, kernel, V, exclude_self=kernel.leave_one_out)
    sigma_V2 = float(np.mean((Y - Z @ theta - g_values) ** 2))
    logger.debug(
        "fit_plm: n=%d q=%d h=%.4g variant=%s sigma_V2=%.6g",
        n, Z.shape[1], kernel.bandwidth, variant.value, sigma_V2,
    )
    return PlmFit(
        theta_hat=theta, S_n=S_n, g_values=g_values, Y_res=Y_res, Z_res=Z_res,
        sigma_V2_hat=sigma_V2, variant=variant, kernel=kernel, Z=Z, Y=Y, V=V,
    )


def choose_alpha(
    dfit: DantzigFit,
    split: SubmodelSplit,
    X: np.ndarray,
    Y: np.ndarray,
    source: str = "dantzig",
) -> tuple[np.ndarray, str]:
    """Direction alpha in U-space and where it came from.

    Tries the Dantzig estimate of gamma (``dantzig`` source, entries at
    LP round-off level dropped), then the centred cross-covariance of U
    with the sub-model residual Y - Z theta_tilde_S, then the first U
    column.
    """
    U = X[:, list(split.idx_U)]
    if source == "dantzig":
        gamma = dfit.beta_tilde[list(split.idx_U)].copy()
        floor = _GAMMA_NOISE * max(1.0, float(np.abs(dfit.beta_tilde).max(initial=0.0)))
        gamma[np.abs(gamma) <= floor] = 0.0
        if np.any(gamma != 0.0):
            return gamma, "dantzig"
        logger.debug("Dantzig gamma is zero on U; falling back to the residual direction")
    elif source != "residual":
        raise ValueError(f"unknown alpha source {source!r}")

    residual = Y - X[:, list(split.idx_Z)] @ dfit.theta_tilde_S
    Uc = U - U.mean(axis=0)
    rc = residual - residual.mean()
    cross = Uc.T @ rc / len(Y)
    scale = np.linalg.norm(Uc) * np.linalg.norm(Y - Y.mean()) / len(Y)
    if np.linalg.norm(cross) > _ALPHA_TOL * max(scale, 1e-300):
        return cross, "residual"

    logger.warning("alpha fallback: residual carries no direction, using the first U column")
    alpha = np.zeros(split.l)
    alpha[0] = 1.0
    return alpha, "first_column"


def _kernel_for(V: np.ndarray, d: int, correction: CorrectionConfig) -> KernelSpec:
    n = V.shape[0]
    stds = V.std(axis=0, ddof=1)
    stds = np.where(stds > 0, stds, 1.0)
    if correction.standardize_v:
        scales = tuple(float(s) for s in stds)
        default_scale = 1.0
    else:
        scales = None
        default_scale = float(np.exp(np.mean(np.log(stds))))
    if correction.bandwidth is not None:
        h = correction.bandwidth
    else:
        h = bandwidth_rule(n, d, 2, correction.bandwidth_scale or default_scale)
    return KernelSpec(bandwidth=h, dim=d + 1, scales=scales, leave_one_out=correction.leave_one_out)


def fit_post_dantzig(
    dataset: Dataset,
    split: SubmodelSplit,
    dfit: DantzigFit,
    d: int = 1,
    *,
    correction: CorrectionConfig | None = None,
    variance: np.ndarray | None = None,
    alpha: np.ndarray | None = None,
) -> PlmFit:
    """Bias-corrected sub-model estimate theta_hat after Dantzig selection.

    Args:
        dataset: Training data.
        split: Working set (the Dantzig active set) and its complement.
        dfit: Dantzig fit on all p covariates of ``dataset``.
        d: Number of U columns appended to Z in Z*.
        correction: Instrument and kernel settings; defaults when omitted.
        variance: Known per-observation variances for the weighted variant.
        alpha: Explicit U-space direction; overrides ``correction.alpha_source``.

    Raises:
        PlmError: If the split leaves no complement, or from the fit.
        ValueError: If ``split`` and ``dfit`` disagree.
    """
    correction = correction or CorrectionConfig()
    X, Y = dataset.X, dataset.Y
    if split.p != dataset.p or dfit.beta_tilde.shape[0] != dataset.p:
        raise ValueError("split, Dantzig fit and dataset must cover the same p covariates")
    if split.idx_Z != tuple(sorted(dfit.active)):
        raise ValueError("split.idx_Z must be the Dantzig active set")
    if split.l == 0:
        raise PlmError("no complement; nothing to correct")

    if alpha is None:
        alpha, source = choose_alpha(dfit, split, X, Y, correction.alpha_source)
    else:
        source = "given"
    Z = X[:, list(split.idx_Z)]
    U = X[:, list(split.idx_U)]
    plan = plan_instruments(
        Z, U, alpha,
        d=d,
        residual=Y - X @ dfit.beta_tilde,
        u_star_mode=correction.u_star_mode,
        a_method=correction.a_method,
        whiten=correction.whiten,
        c_ridge=correction.c_ridge,
    )
    kernel = _kernel_for(plan.V, d, correction)
    variant = PlmVariant.pick(dantzig_alpha=source != "given", weighted=variance is not None)
    fit = fit_plm(Z, Y, plan.V, kernel, variance, variant=variant)
    logger.debug("fit_post_dantzig: q=%d l=%d alpha=%s h=%.4g", split.q, split.l, source, kernel.bandwidth)
    return replace(fit, plan=plan, split=split, alpha_source=source)


def predict_full(fit: PlmFit, Z_new: np.ndarray, V_new: np.ndarray) -> np.ndarray:
    """theta_hat'Z + g(V) for each new row."""
    Z_new = np.asarray(Z_new, dtype=float).reshape(-1, fit.q)
    V_new = np.asarray(V_new, dtype=float).reshape(-1, fit.kernel.dim)
    if Z_new.shape[0] != V_new.shape[0]:
        raise ValueError(f"Z_new has {Z_new.shape[0]} rows but V_new has {V_new.shape[0]}")
    g = estimate_g(fit.theta_hat, fit.Z, fit.Y, fit.V, fit.kernel, V_new)
    return Z_new @ fit.theta_hat + g


def predict_submodel(fit: PlmFit, Z_new: np.ndarray) -> np.ndarray:
    """theta_hat'Z + mean of g over the training instruments."""
    Z_new = np.asarray(Z_new, dtype=float).reshape(-1, fit.q)
    return Z_new @ fit.theta_hat + fit.g_bar


def predict_ols(theta_tilde_S: np.ndarray, Z_new: np.ndarray) -> np.ndarray:
    """Sub-model least-squares prediction theta_tilde_S'Z."""
    theta = np.asarray(theta_tilde_S, dtype=float)
    Z_new = np.asarray(Z_new, dtype=float).reshape(-1, theta.shape[0])
    return Z_new @ theta
