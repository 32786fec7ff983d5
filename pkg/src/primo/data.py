"""Bounded design and outcome matrices.

Bounds are part of the privacy contract, so both containers enforce them at
construction: rows of X are scaled down onto the ``x_bound`` ball and entries
of Y are clipped to ``[-y_bound, y_bound]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def clip_rows(x, bound):
    """Scale every row with l2 norm above ``bound`` down to norm ``bound``."""
    x = np.array(x, dtype=float, copy=True)
    norms = np.linalg.norm(x, axis=1)
    over = norms > bound
    if np.any(over):
        x[over] *= (bound / norms[over])[:, None]
    return x


@dataclass(frozen=True)
class DesignMatrix:
    """Private n x d covariates with declared row-norm bound ``x_bound``."""

    x: np.ndarray
    x_bound: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2 or min(x.shape) < 1:
            raise ValueError(f"design matrix must be a non-empty 2-d array, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("design matrix contains non-finite entries")
        if not (self.x_bound >= 0 and np.isfinite(self.x_bound)):
            raise ValueError(f"x_bound must be finite and nonnegative, got {self.x_bound}")
        object.__setattr__(self, "x", clip_rows(x, self.x_bound))
        object.__setattr__(self, "x_bound", float(self.x_bound))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def take_rows(self, idx) -> "DesignMatrix":
        """Rows ``idx`` as a new design matrix, without re-clipping."""
        sub = object.__new__(DesignMatrix)
        object.__setattr__(sub, "x", self.x[np.asarray(idx)])
        object.__setattr__(sub, "x_bound", self.x_bound)
        return sub


@dataclass(frozen=True)
class OutcomeMatrix:
    """n x l outcomes (one column per regression) with entry bound ``y_bound``."""

    y: np.ndarray
    y_bound: float
    row_norms: np.ndarray = field(init=False, repr=False)
    max_row_norm: float = field(init=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or min(y.shape) < 1:
            raise ValueError(f"outcome matrix must be a non-empty 2-d array, got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("outcome matrix contains non-finite entries")
        if not (self.y_bound >= 0 and np.isfinite(self.y_bound)):
            raise ValueError(f"y_bound must be finite and nonnegative, got {self.y_bound}")
        y = np.clip(y, -self.y_bound, self.y_bound)
        row_norms = np.linalg.norm(y, axis=1)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "y_bound", float(self.y_bound))
        object.__setattr__(self, "row_norms", row_norms)
        object.__setattr__(self, "max_row_norm", float(row_norms.max()))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def l(self) -> int:
        return self.y.shape[1]

    def take_columns(self, idx) -> "OutcomeMatrix":
        return OutcomeMatrix(self.y[:, np.asarray(idx)], self.y_bound)
