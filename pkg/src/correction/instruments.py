"""Instrument construction for the bias-corrected sub-model.

The instrument is V = (U alpha / rho, Z* A') with Z* = (Z, U_star), the
selected covariates augmented by d columns of the discarded block U.
A is either the transpose of the leading eigenvectors of the thresholded
cross-moment matrix Omega (``eigen``) or a single ridge-regularised row
(``row``, d = 1).
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from src.core.errors import InstrumentError

logger = logging.getLogger(__name__)

# Relative cut-off below which an eigenvalue counts as zero
_EIG_TOL = 1e-12
# Exhaustive sign search up to this many coordinates, greedy above
_MAX_EXHAUSTIVE_SIGNS = 13


@dataclass(frozen=True, eq=False)
class OmegaEstimate:
    """Thresholded Omega with its descending eigenvalues and leading eigenvectors."""

    omega_hat: np.ndarray
    eigvals: np.ndarray
    Q1: np.ndarray

    @property
    def d(self) -> int:
        return self.Q1.shape[1]

    @property
    def rank(self) -> int:
        top = max(float(self.eigvals[0]), 0.0) if self.eigvals.size else 0.0
        return int(np.sum(self.eigvals > _EIG_TOL * max(top, 1.0)))


@dataclass(frozen=True, eq=False)
class ZStarTransform:
    """Centring and optional whitening applied to Z* before Omega is estimated.

    ``apply`` maps raw rows to ``(z - mean) @ whitener.T``; the whitener is
    the inverse square root of the sample covariance (identity when
    whitening is off).
    """

    mean: np.ndarray
    whitener: np.ndarray

    @classmethod
    def fit(cls, Z_star: np.ndarray, *, whiten: bool = True) -> ZStarTransform:
        Z_star = np.asarray(Z_star, dtype=float)
        mean = Z_star.mean(axis=0)
        k = Z_star.shape[1]
        if not whiten:
            return cls(mean=mean, whitener=np.eye(k))
        centred = Z_star - mean
        cov = centred.T @ centred / Z_star.shape[0]
        vals, vecs = linalg.eigh(cov)
        cutoff = _EIG_TOL * max(float(vals.max()), 1e-300)
        keep = vals > cutoff
        if not keep.all():
            logger.warning(
                "Z* covariance has %d near-zero eigenvalue(s); whitening on the remaining subspace",
                int((~keep).sum()),
            )
        inv_sqrt = np.zeros_like(vals)
        inv_sqrt[keep] = 1.0 / np.sqrt(vals[keep])
        return cls(mean=mean, whitener=(vecs * inv_sqrt) @ vecs.T)

    def apply(self, Z_star: np.ndarray) -> np.ndarray:
        return (np.asarray(Z_star, dtype=float) - self.mean) @ self.whitener.T


@dataclass(frozen=True, eq=False)
class InstrumentPlan:
    """Everything needed to rebuild V on new data: A, alpha, rho and the Z* map.

    ``u_star`` holds the positions (within U) of the columns appended to Z.
    """

    A: np.ndarray
    d: int
    alpha: np.ndarray
    rho_scale: float
    lambda_M: float
    V: np.ndarray
    u_star: tuple[int, ...]
    zstar_transform: ZStarTransform | None = None
    omega: OmegaEstimate | None = None
    a_method: str = "eigen"

    @property
    def A_raw(self) -> np.ndarray:
        """A expressed on raw (centred, unwhitened) Z* coordinates."""
        if self.zstar_transform is None:
            return self.A
        return self.A @ self.zstar_transform.whitener

    def transform(self, Z: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Build V for new rows with the frozen alpha, rho, A and Z* map."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if U.shape[1] != self.alpha.shape[0]:
            raise ValueError(f"U must have {self.alpha.shape[0]} columns, got {U.shape[1]}")
        Z_star = np.hstack([Z, U[:, list(self.u_star)]])
        if self.zstar_transform is not None:
            Z_star = self.zstar_transform.apply(Z_star)
        return np.column_stack([U @ self.alpha / self.rho_scale, Z_star @ self.A.T])

    def plan_report(self, idx_U: tuple[int, ...] | None = None) -> dict:
        """Instrument block for fit reports; U-columns are 1-based.

        With ``idx_U`` the chosen columns are given as covariate numbers
        of the full design, otherwise as positions within U.
        """
        if idx_U is None:
            chosen = [j + 1 for j in self.u_star]
        else:
            chosen = [idx_U[j] + 1 for j in self.u_star]
        report = {
            "a_method": self.a_method,
            "d": self.d,
            "A": self.A.tolist(),
            "A_raw": self.A_raw.tolist(),
            "alpha": self.alpha.tolist(),
            "rho": self.rho_scale,
            "lambda_M": self.lambda_M,
            "u_star_columns": chosen,
        }
        if self.omega is not None:
            report["omega_eigenvalues"] = self.omega.eigvals[: max(self.d, 5)].tolist()
        return report


def _sign_normalise(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            out[:, j] = -col
    return out


def choose_u_star(U: np.ndarray, residual: np.ndarray | None, d: int, mode: str = "residual") -> tuple[int, ...]:
    """Pick the d columns of U appended to Z in Z*.

    ``residual`` mode takes the columns most correlated (in absolute
    value) with ``residual``, lower index first on ties; ``first`` takes
    columns 0..d-1.
    """
    U = np.asarray(U, dtype=float)
    l = U.shape[1]
    if d < 1:
        raise ValueError("d must be >= 1")
    if d > l:
        raise InstrumentError(f"d = {d} exceeds the {l} available U columns")
    if mode == "first" or residual is None:
        return tuple(range(d))
    if mode != "residual":
        raise ValueError(f"unknown u_star mode {mode!r}")
    rc = np.asarray(residual, dtype=float) - np.mean(residual)
    Uc = U - U.mean(axis=0)
    norms = np.linalg.norm(Uc, axis=0) * np.linalg.norm(rc)
    scores = np.zeros(l)
    ok = norms > 0
    scores[ok] = np.abs(Uc[:, ok].T @ rc) / norms[ok]
    order = np.lexsort((np.arange(l), -scores))
    return tuple(sorted(int(j) for j in order[:d]))


def thresholded_cross_moments(U: np.ndarray, Z_star: np.ndarray) -> np.ndarray:
    """l x (q+d) matrix of (1/n) sum U_k Z*_i, zeroed where |.| <= 1/sqrt(n).

    Inputs are centred here.
    """
    U = np.asarray(U, dtype=float)
    Z_star = np.asarray(Z_star, dtype=float)
    n = U.shape[0]
    if Z_star.shape[0] != n:
        raise ValueError(f"U has {n} rows but Z* has {Z_star.shape[0]}")
    C = (U - U.mean(axis=0)).T @ (Z_star - Z_star.mean(axis=0)) / n
    C[np.abs(C) <= 1.0 / np.sqrt(n)] = 0.0
    return C


def omega_from_cross_moments(C: np.ndarray, d: int) -> OmegaEstimate:
    """Eigen-decompose Omega = C'C and keep the d leading eigenvectors."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    k = C.shape[1]
    if not 1 <= d <= k:
        raise ValueError(f"d must lie in 1..{k}, got {d}")
    omega = C.T @ C
    omega = 0.5 * (omega + omega.T)
    vals, vecs = linalg.eigh(omega)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = _sign_normalise(vecs[:, order])
    estimate = OmegaEstimate(omega_hat=omega, eigvals=vals, Q1=vecs[:, :d])
    if estimate.rank < d:
        logger.warning(
            "rank deficiency; instruments may be uninformative (%d positive eigenvalue(s) for d = %d)",
            estimate.rank, d,
        )
    return estimate


def estimate_omega(
    Z: np.ndarray,
    U: np.ndarray,
    d: int,
    *,
    u_star: tuple[int, ...] | None = None,
    transform: ZStarTransform | None = None,
) -> OmegaEstimate:
    """Thresholded moment estimate of Omega for Z* = (Z, U[:, u_star]).

    Args:
        Z: n x q selected covariates.
        U: n x l discarded covariates.
        d: Number of U columns in Z* (and of leading eigenvectors kept).
        u_star: Positions within U of the Z* columns; defaults to 0..d-1.
        transform: Map applied to Z* first (centring only when omitted).

    Raises:
        InstrumentError: If d > l.
        ValueError: If the shapes disagree.
    """
    Z = np.asarray(Z, dtype=float)
    U = np.asarray(U, dtype=float)
    if d > U.shape[1]:
        raise InstrumentError(f"d = {d} exceeds the {U.shape[1]} available U columns")
    u_star = tuple(range(d)) if u_star is None else u_star
    Z_star = np.hstack([Z, U[:, list(u_star)]])
    if transform is not None:
        Z_star = transform.apply(Z_star)
    return omega_from_cross_moments(thresholded_cross_moments(U, Z_star), d)


def compute_A_eigen(omega: OmegaEstimate) -> np.ndarray:
    """A = Q1'; rows are orthonormal."""
    return omega.Q1.T.copy()


def _search_signs(magnitudes: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Signs s minimising (s*m) M (s*m)', first sign fixed to +1."""
    k = magnitudes.shape[0]
    Mm = M * np.outer(magnitudes, magnitudes)
    if k == 1:
        return np.ones(1)
    if k <= _MAX_EXHAUSTIVE_SIGNS:
        best, best_val = None, np.inf
        for tail in itertools.product((1.0, -1.0), repeat=k - 1):
            s = np.array((1.0,) + tail)
            val = s @ Mm @ s
            if val < best_val - 1e-14:
                best, best_val = s, val
        return best
    s = np.ones(k)
    improved = True
    while improved:
        improved = False
        for j in range(1, k):
            # flipping s_j changes the quadratic form by -4 s_j (Mm s)_j + 4 Mm_jj
            delta = -4.0 * s[j] * (Mm[j] @ s) + 4.0 * Mm[j, j]
            if delta < -1e-14:
                s[j] = -s[j]
                improved = True
    return s


def compute_A_row(Z_star: np.ndarray, D: np.ndarray, c_ridge=None) -> np.ndarray:
    """Ridge-regularised single instrument row for d = 1.

    Each block A_k = D_k G (G + c_k I)^-1 with G the centred Gram matrix
    of Z*; the coordinates are a_k = s_k ||A_k|| with signs minimising the
    quadratic objective, normalised to unit length. The sign search runs
    on D / ||D||_2, so A does not change when D is rescaled; for the
    projection D = pinv(C) C this is D itself.

    Args:
        Z_star: n x (q+1) augmented covariates.
        D: (q+1) x (q+1) projection estimate with rows D_k.
        c_ridge: Scalar or per-row ridge constants (> 0); defaults to
            n ** -0.5.

    Returns:
        The unit-norm row A as a 1-d array of length q+1.

    Raises:
        InstrumentError: If every A_k vanishes.
    """
    Z_star = np.asarray(Z_star, dtype=float)
    D = np.asarray(D, dtype=float)
    n, k = Z_star.shape
    if D.shape != (k, k):
        raise ValueError(f"D must have shape ({k}, {k}), got {D.shape}")
    c = np.full(k, n ** -0.5) if c_ridge is None else np.broadcast_to(np.asarray(c_ridge, dtype=float), (k,))
    if np.any(c <= 0):
        raise ValueError("c_ridge entries must be > 0")

    centred = Z_star - Z_star.mean(axis=0)
    G = centred.T @ centred / n
    blocks = np.empty((k, k))
    for j in range(k):
        # G is symmetric, so D_j G (G + c I)^-1 = ((G + c I)^-1 G D_j')'
        blocks[j] = linalg.solve(G + c[j] * np.eye(k), G @ D[j], assume_a="sym")
    magnitudes = np.linalg.norm(blocks, axis=1)
    if not np.any(magnitudes > 0):
        raise InstrumentError("instrument direction undetermined")

    D_scaled = D / np.linalg.norm(D, 2)
    M = G - (G @ D_scaled.T + D_scaled @ G)
    signs = _search_signs(magnitudes, 0.5 * (M + M.T))
    A = signs * magnitudes
    return A / np.linalg.norm(A)


def build_instrument_V(
    Z: np.ndarray,
    U: np.ndarray,
    A: np.ndarray,
    alpha: np.ndarray,
    *,
    u_star: tuple[int, ...] | None = None,
    transform: ZStarTransform | None = None,
) -> InstrumentPlan:
    """Assemble V = (U alpha / rho, Z* A') and the plan that reproduces it.

    rho = ||alpha|| * sqrt(lambda_M) with lambda_M the largest eigenvalue
    of UU' (the squared top singular value of U).

    Raises:
        InstrumentError: If alpha is zero or U is identically zero.
        ValueError: On shape mismatches or rows of A that are not unit length.
    """
    Z = np.asarray(Z, dtype=float)
    U = np.asarray(U, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    alpha = np.asarray(alpha, dtype=float).ravel()
    d = A.shape[0]
    u_star = tuple(range(d)) if u_star is None else tuple(u_star)
    if len(u_star) != d:
        raise ValueError(f"A has {d} rows but {len(u_star)} U columns were chosen for Z*")
    if A.shape[1] != Z.shape[1] + d:
        raise ValueError(f"A must have {Z.shape[1] + d} columns, got {A.shape[1]}")
    if alpha.shape[0] != U.shape[1]:
        raise ValueError(f"alpha must have length {U.shape[1]}, got {alpha.shape[0]}")
    if not np.allclose(np.linalg.norm(A, axis=1), 1.0, atol=1e-10):
        raise ValueError("rows of A must have unit length")

    alpha_norm = float(np.linalg.norm(alpha))
    if alpha_norm == 0.0:
        raise InstrumentError("alpha must not be the zero vector")
    lambda_M = float(np.linalg.norm(U, 2) ** 2)
    if lambda_M == 0.0:
        raise InstrumentError("U is identically zero; the first instrument is undefined")
    rho = alpha_norm * np.sqrt(lambda_M)

    plan = InstrumentPlan(
        A=A, d=d, alpha=alpha, rho_scale=float(rho), lambda_M=lambda_M,
        V=np.empty((0, d + 1)), u_star=u_star, zstar_transform=transform,
    )
    V = plan.transform(Z, U)
    logger.debug("instrument V built: n=%d d=%d rho=%.6g lambda_M=%.6g", V.shape[0], d, rho, lambda_M)
    return replace(plan, V=V)


def plan_instruments(
    Z: np.ndarray,
    U: np.ndarray,
    alpha: np.ndarray,
    *,
    d: int = 1,
    residual: np.ndarray | None = None,
    u_star_mode: str = "residual",
    a_method: str = "eigen",
    whiten: bool = True,
    c_ridge: float | None = None,
) -> InstrumentPlan:
    """Choose U_star, estimate A by ``a_method`` and build V in one go."""
    Z = np.asarray(Z, dtype=float)
    U = np.asarray(U, dtype=float)
    u_star = choose_u_star(U, residual, d, u_star_mode)
    Z_star = np.hstack([Z, U[:, list(u_star)]])
    transform = ZStarTransform.fit(Z_star, whiten=whiten)
    C = thresholded_cross_moments(U, transform.apply(Z_star))

    omega = None
    if a_method == "eigen":
        omega = omega_from_cross_moments(C, d)
        A = compute_A_eigen(omega)
    elif a_method == "row":
        if d != 1:
            raise ValueError("the row method builds a single instrument row (d = 1)")
        D = np.linalg.pinv(C) @ C
        A = compute_A_row(transform.apply(Z_star), D, c_ridge)[None, :]
    else:
        raise ValueError(f"unknown A method {a_method!r}")

    plan = build_instrument_V(Z, U, A, alpha, u_star=u_star, transform=transform)
    logger.debug("instrument plan: method=%s u_star=%s", a_method, u_star)
    return replace(plan, omega=omega, a_method=a_method)
