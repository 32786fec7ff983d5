"""Private least squares for l outcomes that share one design matrix.

``reuse_cov`` privatizes the covariance (1/n) X^T X once, factors it once, and
reuses the factorization for every outcome. The association term (1/n) X^T Y
is released either with the Gaussian mechanism or, when Y is public, with the
projection mechanism. ``naive_ssp_baseline`` runs an independent
sufficient-statistics regression per outcome for comparison.

Random streams are keyed by ``(seed, phase, key)`` (see :func:`primo.privacy.stream`).
The covariance draw of ``reuse_cov`` uses key 0; the Gaussian association
noise of column j uses ``column_keys[j]`` (default ``j``), so relabelling the
outcomes together with their keys permutes the output columns exactly.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import DesignMatrix, OutcomeMatrix
from .linalg import DimensionError, QRFactors, SingularSystemError, back_substitute, qr_decompose
from .privacy import (
    Phase,
    PrivacyBudget,
    association_sensitivity,
    calibration_constant,
    covariance_sensitivity,
    gaussian_vector_mech,
    stream,
    subsample_amplified_budget,
    symmetric_gaussian_noise,
)
from .query_release import kron_spectrum, projection_mechanism

OLS_LAMBDA_FLOOR = 1e-10


class Mechanism(str, enum.Enum):
    GAUSS = "gauss"
    PROJECTION = "projection"
    NONE = "none"

    @classmethod
    def parse(cls, name: str) -> "Mechanism":
        aliases = {"proj": cls.PROJECTION, "gaussian": cls.GAUSS}
        key = name.strip().lower()
        return aliases[key] if key in aliases else cls(key)


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    budget: PrivacyBudget
    mechanism: Mechanism = Mechanism.GAUSS
    subsample_s: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"ridge parameter must be nonnegative, got {self.lam}")
        if self.subsample_s is not None and self.subsample_s < 1:
            raise ValueError("subsample size must be positive")
        if not isinstance(self.mechanism, Mechanism):
            object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))


@dataclass
class PrimoSolution:
    w_hat: np.ndarray
    sigma_cov: float
    sigma_assoc_or_r: float
    mechanism: str
    seed: int
    wall_times: dict = field(default_factory=dict)
    subsample_s: int | None = None


def _check_shapes(x: DesignMatrix, y: OutcomeMatrix):
    if x.n != y.n:
        raise DimensionError(f"X has {x.n} rows but Y has {y.n}")


def form_covariance(x: DesignMatrix) -> np.ndarray:
    """(1/n) X^T X by plain matrix multiplication, O(n d^2)."""
    cov = (x.x.T @ x.x) / x.n
    return 0.5 * (cov + cov.T)


def ols_ridge_solve(x: DesignMatrix, y: OutcomeMatrix, lam: float) -> np.ndarray:
    """Non-private ridge (lam > 0) or OLS (lam = 0) coefficients, d x l."""
    _check_shapes(x, y)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    a = form_covariance(x) + lam * np.eye(x.d)
    qr = qr_decompose(a)
    return back_substitute(qr.r, qr.q.T @ ((x.x.T @ y.y) / x.n))


def ols_reference(x: DesignMatrix, y: OutcomeMatrix) -> np.ndarray:
    """Unregularized optimum, falling back to a tiny ridge when X^T X is singular."""
    try:
        return ols_ridge_solve(x, y, 0.0)
    except SingularSystemError:
        return ols_ridge_solve(x, y, OLS_LAMBDA_FLOOR)


def noisy_covariance(x: DesignMatrix, lam: float, b_half: PrivacyBudget, rng: np.random.Generator):
    """Private (1/n) X^T X + E + lam I and its QR factors.

    Returns ``(I_hat, QRFactors, sigma)``. I_hat may be indefinite; it is
    factored as is (re-drawing would break the accounting).
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    sigma = calibration_constant(b_half) * covariance_sensitivity(x.x_bound, x.n)
    i_hat = form_covariance(x) + symmetric_gaussian_noise(x.d, sigma, rng) + lam * np.eye(x.d)
    return i_hat, qr_decompose(i_hat), sigma


def _column_keys(l, column_keys):
    if column_keys is None:
        return range(l)
    keys = list(column_keys)
    if len(keys) != l:
        raise DimensionError(f"{len(keys)} column keys for {l} outcomes")
    return keys


def _gauss_association(x, y, b_half, seed, keys):
    v = (x.x.T @ y.y) / x.n
    sens = association_sensitivity(x.x_bound, y.y_bound, y.l, x.n)
    v_hat = np.empty_like(v)
    sigma = 0.0
    for j, key in enumerate(keys):
        v_hat[:, j], sigma = gaussian_vector_mech(v[:, j], sens, b_half, stream(seed, Phase.ASSOCIATION, key))
    return v_hat, sigma


def _solve_shared(qr: QRFactors, v_hat):
    return back_substitute(qr.r, qr.q.T @ v_hat)


def _reuse_cov(x_cov: DesignMatrix, cov_budget: PrivacyBudget, x, y, cfg, column_keys):
    _check_shapes(x, y)
    if cfg.mechanism not in (Mechanism.GAUSS, Mechanism.PROJECTION):
        raise ValueError(f"reuse_cov needs a private association mechanism, got {cfg.mechanism.value}")
    half = cfg.budget.halve()
    keys = _column_keys(y.l, column_keys)
    times = {}

    t0 = time.perf_counter()
    _, qr, sigma_cov = noisy_covariance(x_cov, cfg.lam, cov_budget, stream(cfg.seed, Phase.COVARIANCE, 0))
    times["covariance"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.mechanism is Mechanism.GAUSS:
        v_hat, scale = _gauss_association(x, y, half, cfg.seed, keys)
    else:
        rel = projection_mechanism(x, y, half, stream(cfg.seed, Phase.PROJECTION), spec=kron_spectrum(y, x.d))
        v_hat, scale = rel.g_hat.reshape(x.d, y.l), rel.radius
    times["mechanism"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    w_hat = _solve_shared(qr, v_hat)
    times["solve"] = time.perf_counter() - t0

    return PrimoSolution(
        w_hat=w_hat,
        sigma_cov=sigma_cov,
        sigma_assoc_or_r=scale,
        mechanism=cfg.mechanism.value,
        seed=cfg.seed,
        wall_times=times,
    )


def reuse_cov(x: DesignMatrix, y: OutcomeMatrix, cfg: SolverConfig, column_keys=None) -> PrimoSolution:
    """Shared noisy covariance, private association, one QR, l back substitutions.

    Spends ``budget/2`` on the covariance and ``budget/2`` on the association.
    """
    return _reuse_cov(x, cfg.budget.halve(), x, y, cfg, column_keys)


def subsample_reuse_cov(x: DesignMatrix, y: OutcomeMatrix, cfg: SolverConfig, column_keys=None) -> PrimoSolution:
    """``reuse_cov`` with the covariance estimated on a secret subsample of s rows.

    The subsample is uniform without replacement (rows kept in original order);
    ``s == n`` uses every row, so the output then equals ``reuse_cov``. The
    association term still uses all n rows.
    """
    s = cfg.subsample_s
    if s is None:
        raise ValueError("subsample_reuse_cov needs cfg.subsample_s")
    if not 1 <= s <= x.n:
        raise ValueError(f"subsample size must satisfy 1 <= s <= n={x.n}, got {s}")
    if s == x.n:
        x_s = x
    else:
        idx = np.sort(stream(cfg.seed, Phase.SUBSAMPLE).choice(x.n, size=s, replace=False))
        x_s = x.take_rows(idx)
    sol = _reuse_cov(x_s, subsample_amplified_budget(cfg.budget, x.n, s), x, y, cfg, column_keys)
    sol.subsample_s = s
    return sol


def naive_ssp_baseline(
    x: DesignMatrix, y: OutcomeMatrix, lam: float, b: PrivacyBudget, seed: int = 0, column_keys=None
) -> PrimoSolution:
    """l independent sufficient-statistics regressions.

    Each outcome gets its own noisy covariance and its own noisy association
    vector, spending ``(eps/sqrt(l), delta/l)`` split evenly between the two.
    """
    _check_shapes(x, y)
    l = y.l
    per_run = PrivacyBudget(b.epsilon / math.sqrt(l), b.delta / l).halve()
    keys = _column_keys(l, column_keys)
    sens = association_sensitivity(x.x_bound, y.y_bound, 1, x.n)
    cov = form_covariance(x)
    assoc = (x.x.T @ y.y) / x.n
    sigma_cov = calibration_constant(per_run) * covariance_sensitivity(x.x_bound, x.n)
    ridge = lam * np.eye(x.d)

    t0 = time.perf_counter()
    w_hat = np.empty((x.d, l))
    sigma_assoc = 0.0
    for j, key in enumerate(keys):
        e1 = symmetric_gaussian_noise(x.d, sigma_cov, stream(seed, Phase.COVARIANCE, key))
        qr = qr_decompose(cov + e1 + ridge)
        v_hat, sigma_assoc = gaussian_vector_mech(assoc[:, j], sens, per_run, stream(seed, Phase.ASSOCIATION, key))
        # 2-d right-hand side keeps l = 1 bit-identical to reuse_cov
        w_hat[:, j] = _solve_shared(qr, v_hat[:, None])[:, 0]
    return PrimoSolution(
        w_hat=w_hat,
        sigma_cov=sigma_cov,
        sigma_assoc_or_r=sigma_assoc,
        mechanism="naive",
        seed=seed,
        wall_times={"total": time.perf_counter() - t0},
    )


def _residual_sq(x, y, w):
    res = x.x @ w - y.y
    return float(np.einsum("ij,ij->", res, res))


def excess_loss(x: DesignMatrix, y: OutcomeMatrix, w_hat, w_star=None) -> float:
    """(1/nl) ||X W_hat - Y||_F^2 - (1/nl) ||X W_star - Y||_F^2 (W_star defaults to OLS)."""
    if w_star is None:
        w_star = ols_reference(x, y)
    nl = x.n * y.l
    return _residual_sq(x, y, np.asarray(w_hat)) / nl - _residual_sq(x, y, np.asarray(w_star)) / nl


def loss_ratio(x: DesignMatrix, y: OutcomeMatrix, w_hat, w_ols=None) -> float:
    """||X W_hat - Y||_F^2 / ||X W_ols - Y||_F^2."""
    if w_ols is None:
        w_ols = ols_reference(x, y)
    return _residual_sq(x, y, np.asarray(w_hat)) / _residual_sq(x, y, np.asarray(w_ols))
