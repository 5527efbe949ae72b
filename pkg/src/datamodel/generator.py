"""Synthetic designs of the simulation study.

X ~ N_p(mu, Sigma_X) with Toeplitz Sigma_X[i, j] = (-rho_corr)^|i-j|,
Y = beta'X + eps with eps ~ N(0, sigma_eps^2).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from src.core.errors import DataModelError
from src.core.rng import make_rng
from src.datamodel.models import CoefficientSpec, Dataset

logger = logging.getLogger(__name__)


def make_toeplitz_cov(rho_corr: float, p: int) -> np.ndarray:
    """Return the p x p covariance with entries (-rho_corr)^|i-j|.

    Raises:
        DataModelError: If |rho_corr| >= 1 (the matrix is then singular
            or indefinite).
        ValueError: If p < 1.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not abs(rho_corr) < 1.0:
        raise DataModelError(f"|rho_corr| must be < 1 for a positive definite covariance, got {rho_corr}")
    return linalg.toeplitz((-float(rho_corr)) ** np.arange(p))


def shifted_mean(p: int, I) -> np.ndarray:
    """Mean vector with 0 on the significant positions I (1-based) and 2 elsewhere."""
    mu = np.full(p, 2.0)
    mu[np.asarray(I, dtype=int) - 1] = 0.0
    return mu


def make_beta(spec: CoefficientSpec, p: int) -> np.ndarray:
    """Expand a coefficient design into a full p-vector.

    The tail draws are made for all p positions first and the significant
    block is written over them, so the vector depends on (spec, p) only.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if max(spec.I) > p:
        raise ValueError(f"index {max(spec.I)} in I exceeds p = {p}")
    rng = make_rng(spec.seed)
    beta = rng.uniform(spec.tail_low, spec.tail_high, size=p)
    beta[beta < 0] = 0.0
    beta[np.asarray(spec.I) - 1] = spec.beta_I
    logger.debug(
        "beta drawn: p=%d S=%d tail zeros=%d seed=%d",
        p, spec.S, int(np.sum(beta == 0.0)), spec.seed,
    )
    return beta


def theoretical_r2(beta: np.ndarray, Sigma_X: np.ndarray, sigma_eps: float) -> float:
    """Population R^2 = b'Sb / (b'Sb + sigma_eps^2).

    Raises:
        DataModelError: If beta'Sigma beta and sigma_eps are both zero.
    """
    if sigma_eps < 0:
        raise ValueError("sigma_eps must be >= 0")
    beta = np.asarray(beta, dtype=float)
    signal = float(beta @ Sigma_X @ beta)
    total = signal + sigma_eps ** 2
    if total == 0.0:
        raise DataModelError("R^2 undefined: zero signal and zero noise")
    return signal / total


def sigma_for_r2(beta: np.ndarray, Sigma_X: np.ndarray, r2: float) -> float:
    """Invert theoretical_r2 for the noise level: sqrt(b'Sb (1 - R^2) / R^2)."""
    if not 0.0 < r2 <= 1.0:
        raise ValueError(f"target R^2 must lie in (0, 1], got {r2}")
    beta = np.asarray(beta, dtype=float)
    signal = float(beta @ Sigma_X @ beta)
    if signal <= 0.0:
        raise DataModelError("cannot reach a target R^2 with zero signal")
    return float(np.sqrt(signal * (1.0 - r2) / r2))


@dataclass(frozen=True, eq=False)
class TrueModel:
    """Generating truth: coefficients, Toeplitz design, mean and noise level."""

    beta: np.ndarray
    rho_corr: float
    mu: np.ndarray
    sigma_eps: float

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=float)
        mu = np.array(self.mu, dtype=float)
        if beta.ndim != 1 or mu.shape != beta.shape:
            raise ValueError(f"beta and mu must be vectors of one length, got {beta.shape} and {mu.shape}")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be >= 0")
        beta.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "mu", mu)

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    @cached_property
    def Sigma_X(self) -> np.ndarray:
        return make_toeplitz_cov(self.rho_corr, self.p)

    @cached_property
    def cholesky_factor(self) -> np.ndarray:
        try:
            return linalg.cholesky(self.Sigma_X, lower=True)
        except linalg.LinAlgError as exc:
            raise DataModelError(f"covariance is not positive definite: {exc}") from exc

    @property
    def r2(self) -> float:
        return theoretical_r2(self.beta, self.Sigma_X, self.sigma_eps)

    @classmethod
    def for_r2(cls, beta, rho_corr: float, mu, target_r2: float) -> TrueModel:
        """Build a model whose noise level gives the requested theoretical R^2."""
        sigma = sigma_for_r2(np.asarray(beta, dtype=float), make_toeplitz_cov(rho_corr, len(beta)), target_r2)
        return cls(beta=beta, rho_corr=rho_corr, mu=mu, sigma_eps=sigma)


def draw_sample(model: TrueModel, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw (X, Y) with n rows from ``rng``; n may be 1 (holdout rows)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    X = model.mu + rng.standard_normal((n, model.p)) @ model.cholesky_factor.T
    eps = model.sigma_eps * rng.standard_normal(n)
    Y = X @ model.beta + eps
    return X, Y


def simulate_dataset(model: TrueModel, n: int, seed: int, *keys: int) -> Dataset:
    """Draw an i.i.d. sample of size n; deterministic in (model, n, seed, keys)."""
    X, Y = draw_sample(model, n, make_rng(seed, *keys))
    logger.debug("Simulated n=%d p=%d sigma_eps=%.4g", n, model.p, model.sigma_eps)
    return Dataset(Y=Y, X=X)
