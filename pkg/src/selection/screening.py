"""Sure independence screening: rank covariates by absolute marginal
correlation with the response and keep the top d_keep.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from src.core.errors import ScreeningError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScreenResult:
    """Kept indices (0-based, ascending) and the per-variable scores."""

    kept: tuple[int, ...]
    scores: np.ndarray

    @property
    def ranked(self) -> np.ndarray:
        """All indices by decreasing score, ties broken by lower index."""
        return np.lexsort((np.arange(self.scores.shape[0]), -self.scores))


def marginal_scores(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """|corr(x_j, Y)| for every column; constant columns score 0."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    yc = Y - Y.mean()
    y_norm = np.linalg.norm(yc)
    if y_norm == 0.0:
        raise ScreeningError("response is constant; marginal correlations are undefined")
    Xc = X - X.mean(axis=0)
    col_norms = np.linalg.norm(Xc, axis=0)
    constant = col_norms == 0.0
    if constant.any():
        logger.warning(
            "screening: %d constant column(s) scored 0 (first: %d)",
            int(constant.sum()), int(np.flatnonzero(constant)[0]) + 1,
        )
    safe = np.where(constant, 1.0, col_norms)
    scores = np.abs(Xc.T @ yc) / (safe * y_norm)
    scores[constant] = 0.0
    return scores


def sis_screen(X: np.ndarray, Y: np.ndarray, d_keep: int) -> ScreenResult:
    """Keep the min(d_keep, p) columns most correlated with Y."""
    if d_keep < 1:
        raise ValueError("d_keep must be >= 1")
    scores = marginal_scores(X, Y)
    order = np.lexsort((np.arange(scores.shape[0]), -scores))
    kept = tuple(sorted(int(j) for j in order[:d_keep]))
    logger.debug("sis_screen: kept %d of %d columns", len(kept), scores.shape[0])
    return ScreenResult(kept=kept, scores=scores)
