"""Dense kernels: QR, back substitution, thin SVD and an l2-ball quadratic solver.

Everything here is a pure function of its inputs. Matrices are plain
``numpy.ndarray`` objects; the small result containers are frozen dataclasses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes do not agree with an operation's contract."""


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when a triangular system has a (numerically) zero pivot."""


class DomainError(ValueError):
    """Raised when an argument lies outside the mathematical domain of an operation."""


SINGULAR_RTOL = 1e-12


def _as_finite_matrix(a, name="a"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class QRFactors:
    q: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class ThinSVD:
    """``a = left @ diag(singular_values) @ right.T`` with ``k = min(a.shape)``."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T


def qr_decompose(a) -> QRFactors:
    """Householder QR of a square matrix (LAPACK ``geqrf``/``orgqr``).

    Singular inputs are fine; ``r`` then carries zeros on its diagonal.
    """
    a = _as_finite_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"qr_decompose expects a square matrix, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    return QRFactors(q=q, r=np.triu(r))


def back_substitute(r, v) -> np.ndarray:
    """Solve ``r @ w = v`` for upper-triangular ``r``.

    ``v`` may be a vector or a matrix whose columns are independent right-hand
    sides; all columns are swept together, one row of ``r`` at a time.
    """
    r = _as_finite_matrix(r, "r")
    d = r.shape[0]
    if r.shape[1] != d:
        raise DimensionError(f"r must be square, got {r.shape}")
    v = np.asarray(v, dtype=float)
    if v.shape[0] != d or v.ndim > 2:
        raise DimensionError(f"right-hand side of shape {v.shape} does not match r of size {d}")

    diag = np.abs(np.diag(r))
    scale = diag.max()
    if scale == 0.0 or np.any(diag <= SINGULAR_RTOL * scale):
        raise SingularSystemError("triangular factor has a zero pivot")

    w = np.array(v, dtype=float, copy=True)
    for i in range(d - 1, -1, -1):
        if i < d - 1:
            w[i] -= r[i, i + 1:] @ w[i + 1:]
        w[i] /= r[i, i]
    return w


def thin_svd(a) -> ThinSVD:
    """LAPACK ``gesdd``; wide inputs are factored through their (tall) transpose."""
    a = _as_finite_matrix(a)
    if a.shape[0] < a.shape[1]:
        u, s, vt = np.linalg.svd(a.T, full_matrices=False)
        return ThinSVD(left=vt.T, singular_values=s, right=u)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return ThinSVD(left=u, singular_values=s, right=vt.T)


def symmetric_eig(a):
    """Eigenvalues (nonincreasing) and matching eigenvectors of a symmetric matrix."""
    a = _as_finite_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"symmetric_eig expects a square matrix, got {a.shape}")
    vals, vecs = np.linalg.eigh(a)
    return vals[::-1], vecs[:, ::-1]


@dataclass(frozen=True)
class TrustRegionProblem:
    """min sum(eigenvalues * x**2) - sum(rhs_coords * x)  s.t.  ||x||_2 <= radius.

    The quadratic is written in the eigenbasis of a positive semidefinite
    matrix, so ``eigenvalues`` must be nonnegative and sorted nonincreasing.
    """

    eigenvalues: np.ndarray
    rhs_coords: np.ndarray
    radius: float

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).ravel()
        beta = np.asarray(self.rhs_coords, dtype=float).ravel()
        if lam.shape != beta.shape:
            raise DimensionError(
                f"{lam.size} eigenvalues but {beta.size} right-hand-side coordinates"
            )
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(beta))):
            raise ValueError("trust-region data must be finite")
        if np.any(lam < 0):
            raise DomainError("quadratic term must be positive semidefinite")
        if lam.size > 1 and np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted nonincreasing")
        if not self.radius >= 0:
            raise DomainError(f"radius must be nonnegative, got {self.radius}")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "rhs_coords", beta)
        object.__setattr__(self, "radius", float(self.radius))

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sum(self.eigenvalues * x * x) - np.sum(self.rhs_coords * x))


def trust_region_solve(p: TrustRegionProblem, rtol=1e-12, max_iter=200):
    """Minimum-norm global minimizer of a PSD trust-region subproblem.

    Returns ``(x, mu)`` where ``mu >= 0`` is the multiplier of the ball
    constraint. Interior solutions have ``mu == 0`` and zero components along
    flat directions with no linear term. Boundary solutions solve the secular
    equation ``||x(mu)|| = radius``, ``x(mu)_i = beta_i / (2 (lam_i + mu))``,
    by Newton's method on ``1/radius - 1/||x(mu)||`` safeguarded by bisection.
    For ``radius == 0``, or radii so small that the multiplier overflows, it is
    reported as ``inf`` whenever the linear term is nonzero.
    """
    lam, beta, r = p.eigenvalues, p.rhs_coords, p.radius
    x = np.zeros_like(beta)
    active = beta != 0.0
    if not np.any(active):
        return x, 0.0
    if r == 0.0:
        return x, float("inf")

    lam_a, beta_a = lam[active], beta[active]

    if np.all(lam_a > 0):
        x0 = 0.5 * (beta_a / lam_a)
        if np.linalg.norm(x0) <= r:
            x[active] = x0
            return x, 0.0

    # ||x(mu)|| >= |beta_i| / (2 (lam_i + mu)) for every i gives a lower bound;
    # ||x(mu)|| <= ||beta|| / (2 mu) gives an upper one.
    with np.errstate(over="ignore"):
        lo = max(0.0, float(np.max(np.abs(beta_a) / (2.0 * r) - lam_a)))
        hi = float(np.linalg.norm(beta_a) / (2.0 * r))
    if not np.isfinite(hi):
        # mu overflows, so lam is negligible next to it and x(mu) points along beta
        u = beta_a / np.max(np.abs(beta_a))
        x[active] = r * u / np.linalg.norm(u)
        return x, float("inf")
    # lo == 0 only when every lam_a > 0, so x(lo) is finite
    mu = lo
    for _ in range(max_iter):
        shift = lam_a + mu
        xa = 0.5 * (beta_a / shift)
        s = float(np.linalg.norm(xa))
        if abs(s - r) <= rtol * r:
            break
        if s == 0.0:
            # x(mu) underflowed; only possible for subnormal radii
            hi = mu
            mu = 0.5 * (lo + hi)
            continue
        if s > r:
            lo = max(lo, mu)
        else:
            hi = min(hi, mu)
        # phi(mu) = 1/r - 1/s, phi'(mu) = -sum(x_i^2 / shift_i) / s^3
        u = xa / s
        phi = 1.0 / r - 1.0 / s
        dphi = -float(np.sum(u * u / shift)) / s
        step = mu - phi / dphi if dphi != 0.0 else np.nan
        if not np.isfinite(step) or step <= lo or step >= hi:
            step = 0.5 * (lo + hi)
        if step == mu:
            break
        mu = step

    x[active] = 0.5 * (beta_a / (lam_a + mu))
    nrm = np.linalg.norm(x)
    if nrm > r:
        x *= r / nrm
    return x, float(mu)
