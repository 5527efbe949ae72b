"""Shared data containers for datasets, coefficient designs and sub-model splits.

Indices are 0-based inside the library. The 1-based convention of the
coefficient designs (``CoefficientSpec.I``) and of every CSV/YAML file is
converted at the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


def _frozen_array(values, *, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed response vector Y (length n) and covariate matrix X (n x p)."""

    Y: np.ndarray
    X: np.ndarray

    def __post_init__(self) -> None:
        Y = _frozen_array(self.Y, ndim=1, name="Y")
        X = _frozen_array(self.X, ndim=2, name="X")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"Y has {Y.shape[0]} entries but X has {X.shape[0]} rows")
        if Y.shape[0] < 2:
            raise ValueError("a dataset needs n >= 2 observations")
        if X.shape[1] < 1:
            raise ValueError("a dataset needs p >= 1 covariates")
        if not (np.isfinite(Y).all() and np.isfinite(X).all()):
            raise ValueError("dataset entries must be finite")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


class BetaType(Enum):
    """Coefficient designs of the simulation study."""

    I = "I"
    II = "II"
    III = "III"
    CUSTOM = "custom"


_PRESETS: dict[BetaType, tuple[tuple[float, ...], tuple[int, ...]]] = {
    BetaType.I: ((1, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3), (1, 2, 3, 4, 5, 6, 7)),
    BetaType.II: ((1, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3), (1, 17, 33, 49, 65, 81, 97)),
    BetaType.III: ((1, 0.4, -0.3, -0.5, 0.3, 0.3, -0.3), (1, 2, 3, 4, 5, 6, 7)),
}


@dataclass(frozen=True)
class CoefficientSpec:
    """Significant coefficients beta_I at 1-based positions I, plus the tail law.

    Every coefficient outside I is drawn from U(tail_low, tail_high) with
    negative draws set to zero.
    """

    beta_I: tuple[float, ...]
    I: tuple[int, ...]
    beta_type: BetaType = BetaType.CUSTOM
    tail_low: float = -0.5
    tail_high: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta_I", tuple(float(b) for b in self.beta_I))
        object.__setattr__(self, "I", tuple(int(i) for i in self.I))
        if len(self.beta_I) != len(self.I):
            raise ValueError(f"|beta_I| = {len(self.beta_I)} but |I| = {len(self.I)}")
        if len(set(self.I)) != len(self.I):
            raise ValueError(f"duplicate indices in I: {self.I}")
        if any(i < 1 for i in self.I):
            raise ValueError("indices in I are 1-based and must be >= 1")
        if not self.tail_low < self.tail_high:
            raise ValueError("tail_low must be < tail_high")

    @property
    def S(self) -> int:
        return len(self.I)

    @classmethod
    def preset(cls, beta_type: BetaType | str, seed: int = 0, **tails: float) -> CoefficientSpec:
        """Build one of the three preset designs (types I, II, III)."""
        beta_type = BetaType(beta_type)
        if beta_type is BetaType.CUSTOM:
            raise ValueError("custom designs need explicit beta_I and I")
        beta_I, I = _PRESETS[beta_type]
        return cls(beta_I=beta_I, I=I, beta_type=beta_type, seed=seed, **tails)


@dataclass(frozen=True)
class SubmodelSplit:
    """Partition of 0..p-1 into the working set (Z columns) and its complement (U)."""

    idx_Z: tuple[int, ...]
    idx_U: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        z = tuple(sorted(int(i) for i in self.idx_Z))
        u = tuple(sorted(int(i) for i in self.idx_U))
        if not z:
            raise ValueError("idx_Z must not be empty")
        if set(z) & set(u):
            raise ValueError("idx_Z and idx_U overlap")
        p = len(z) + len(u)
        if set(z) | set(u) != set(range(p)) or len(set(z)) != len(z) or len(set(u)) != len(u):
            raise ValueError("idx_Z and idx_U must partition 0..p-1")
        object.__setattr__(self, "idx_Z", z)
        object.__setattr__(self, "idx_U", u)

    @property
    def q(self) -> int:
        return len(self.idx_Z)

    @property
    def l(self) -> int:
        return len(self.idx_U)

    @property
    def p(self) -> int:
        return self.q + self.l

    @classmethod
    def from_selected(cls, selected, p: int) -> SubmodelSplit:
        """Split 0..p-1 into the selected indices and the rest."""
        chosen = sorted(set(int(i) for i in selected))
        if chosen and (chosen[0] < 0 or chosen[-1] >= p):
            raise ValueError(f"selected indices must lie in 0..{p - 1}")
        taken = set(chosen)
        rest = [j for j in range(p) if j not in taken]
        return cls(idx_Z=tuple(chosen), idx_U=tuple(rest))
