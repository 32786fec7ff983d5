"""Privacy accounting and Gaussian noise.

Noise is drawn from ``numpy.random.Generator`` streams derived from an integer
seed with :func:`stream`. This makes experiments reproducible but is NOT a
cryptographically secure or floating-point-safe sampler; do not use these
releases to protect real data without a hardened noise source.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Phase(enum.IntEnum):
    """Labels that separate the random streams used by one solver run."""

    COVARIANCE = 1
    ASSOCIATION = 2
    PROJECTION = 3
    SUBSAMPLE = 4


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``.

    Streams with different keys are statistically independent, so phases and
    columns can be drawn in any order (or in parallel) with identical results.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    def halve(self) -> "PrivacyBudget":
        """Half of the budget; two halves compose (basically) to the whole."""
        return PrivacyBudget(self.epsilon / 2, self.delta / 2)


def calibration_constant(b: PrivacyBudget) -> float:
    """c(eps, delta) = sqrt(2 (1/eps + log(1/delta) / eps^2)), valid for every eps > 0."""
    eps = b.epsilon
    return math.sqrt(2.0 * (1.0 / eps + math.log(1.0 / b.delta) / eps**2))


def gaussian_vector_mech(value, sens: float, b: PrivacyBudget, rng: np.random.Generator):
    """Release ``value + N(0, sigma^2)`` coordinate-wise with ``sigma = c(b) * sens``.

    Returns the noisy array (same shape as ``value``) and ``sigma``.
    """
    if not (sens >= 0 and math.isfinite(sens)):
        raise ValueError(f"sensitivity must be finite and nonnegative, got {sens}")
    value = np.asarray(value, dtype=float)
    sigma = calibration_constant(b) * sens
    if sigma == 0.0:
        return value.copy(), 0.0
    return value + sigma * rng.standard_normal(value.shape), sigma


def symmetric_gaussian_noise(d: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric d x d matrix whose d(d+1)/2 upper-triangular entries are iid N(0, sigma^2)."""
    if d < 1:
        raise ValueError("d must be at least 1")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    iu = np.triu_indices(d)
    e = np.zeros((d, d))
    e[iu] = sigma * rng.standard_normal(iu[0].size)
    return e + np.triu(e, 1).T


def covariance_sensitivity(x_bound: float, n: int) -> float:
    """l2 (Frobenius) sensitivity of (1/n) X^T X under replace-one adjacency.

    ``||x x^T - x' x'^T||_F`` reaches ``sqrt(2) * x_bound**2`` for orthogonal
    rows on the boundary, hence the ``sqrt(2)``.
    """
    if x_bound < 0 or n < 1:
        raise ValueError("need x_bound >= 0 and n >= 1")
    return math.sqrt(2.0) * x_bound**2 / n


def association_sensitivity(x_bound: float, y_bound: float, l: int, n: int) -> float:
    """l2 sensitivity of (1/n) X^T Y under replace-one adjacency: 2 sqrt(l) |X| |Y| / n."""
    if x_bound < 0 or y_bound < 0 or l < 0 or n < 1:
        raise ValueError("bounds and l must be nonnegative, n >= 1")
    return 2.0 * math.sqrt(l) * x_bound * y_bound / n


def subsample_amplified_budget(b: PrivacyBudget, n: int, s: int) -> PrivacyBudget:
    """Budget to spend on a secret uniform subsample of ``s`` out of ``n`` rows.

    Running at ``(n/s * eps/2, delta/2)`` on the subsample costs roughly
    ``(eps/2, delta/2)`` on the full data by secrecy of the sample.
    """
    if not 1 <= s <= n:
        raise ValueError(f"subsample size must satisfy 1 <= s <= n, got s={s}, n={n}")
    return PrivacyBudget((n / s) * (b.epsilon / 2), b.delta / 2)
