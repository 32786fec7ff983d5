"""Inner product queries and the projection mechanism.

With Y public, every entry of the association matrix (1/n) X^T Y is an
inner product query of the private X. Stack the d*l answers as a vector with
entry (k, j) at flat index ``k*l + j`` (row-major d x l) and stack X feature by
feature, ``vec(X)[k*n + i] = X[i, k]``. Then the answers are ``C @ vec(X)``
with ``C = I_d kron (1/n) Y^T``.

Nothing here materializes C. Block k of ``C v`` is ``(1/n) Y^T v_k``, and the
spectrum of ``C^T C`` is read off the thin SVD ``Y^T = L diag(s) V^T``: each
``s_j^2 / n^2`` with multiplicity d, plus zeros.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import DesignMatrix, OutcomeMatrix
from .linalg import DimensionError, ThinSVD, TrustRegionProblem, thin_svd, trust_region_solve
from .privacy import PrivacyBudget, calibration_constant


def inner_product_query(x: DesignMatrix, k: int, y_col) -> float:
    """(1/n) * <column k of X, y_col>."""
    y_col = np.asarray(y_col, dtype=float).ravel()
    if not 0 <= k < x.d:
        raise IndexError(f"feature index {k} out of range for d={x.d}")
    if y_col.size != x.n:
        raise DimensionError(f"y has length {y_col.size}, expected n={x.n}")
    return float(x.x[:, k] @ y_col) / x.n


def true_answers(x: DesignMatrix, y: OutcomeMatrix) -> np.ndarray:
    """All d*l query answers, i.e. vec of (1/n) X^T Y in row-major order."""
    if x.n != y.n:
        raise DimensionError(f"X has {x.n} rows but Y has {y.n}")
    return ((x.x.T @ y.y) / x.n).ravel()


@dataclass(frozen=True)
class KroneckerSpectrum:
    """Implicit spectral data of C^T C for ``C = I_d kron (1/n) Y^T``."""

    d: int
    n: int
    l: int
    y: np.ndarray
    svd: ThinSVD

    @property
    def v(self) -> np.ndarray:
        """Right singular vectors of Y^T (n x k): the eigenvectors within each block."""
        return self.svd.right

    @property
    def sq_singular_over_n2(self) -> np.ndarray:
        return self.svd.singular_values**2 / self.n**2

    @property
    def k(self) -> int:
        return self.svd.singular_values.size

    def eigenvalues(self) -> np.ndarray:
        """All d*n eigenvalues of C^T C, nonincreasing."""
        lam = np.repeat(self.sq_singular_over_n2, self.d)
        return np.concatenate([lam, np.zeros(self.d * self.n - lam.size)])

    def rank_mask(self) -> np.ndarray:
        s = self.svd.singular_values
        if s.size == 0 or s[0] == 0.0:
            return np.zeros(s.size, dtype=bool)
        return s > max(self.n, self.l) * np.finfo(float).eps * s[0]


def kron_spectrum(y: OutcomeMatrix, d: int) -> KroneckerSpectrum:
    """Thin SVD of Y^T once; O(n l min(n, l)) and independent of d."""
    if d < 1:
        raise ValueError("d must be at least 1")
    return KroneckerSpectrum(d=d, n=y.n, l=y.l, y=y.y, svd=thin_svd(y.y.T))


def _blocks(vec, d, width, what):
    vec = np.asarray(vec, dtype=float)
    if vec.size != d * width:
        raise DimensionError(f"{what} has length {vec.size}, expected {d}*{width}")
    return vec.reshape(d, width)


def apply_C(spec: KroneckerSpectrum, v) -> np.ndarray:
    """C @ v for v of length d*n; block k maps to (1/n) Y^T v_k."""
    vb = _blocks(v, spec.d, spec.n, "v")
    return ((vb @ spec.y) / spec.n).ravel()


def apply_Ct(spec: KroneckerSpectrum, g) -> np.ndarray:
    """C^T @ g for g of length d*l; block k maps to (1/n) Y g_k."""
    gb = _blocks(g, spec.d, spec.l, "g")
    return ((gb @ spec.y.T) / spec.n).ravel()


def eigenbasis_coords(spec: KroneckerSpectrum, g_tilde) -> np.ndarray:
    """Coordinates of b = 2 C^T g_tilde in the basis I_d kron V.

    Block k holds ``V^T b_k = (2/n) diag(s) L^T g_k``; returned flattened
    block by block (length d*k). Components of b outside the span are zero
    because b lies in the range of I_d kron Y.
    """
    gb = _blocks(g_tilde, spec.d, spec.l, "g_tilde")
    return ((2.0 / spec.n) * (gb @ spec.svd.left) * spec.svd.singular_values).ravel()


def lift_coords(spec: KroneckerSpectrum, coords) -> np.ndarray:
    """Map eigenbasis coordinates (d*k, block by block) back to vec(X) space."""
    zb = _blocks(coords, spec.d, spec.k, "coords")
    return (zb @ spec.v.T).ravel()


@dataclass(frozen=True)
class FeasiblePreimage:
    coords: np.ndarray
    multiplier: float
    g_hat: np.ndarray

    @property
    def x_norm(self) -> float:
        return float(np.linalg.norm(self.coords))


def solve_feasible_preimage(spec: KroneckerSpectrum, g_tilde, x_bound: float) -> FeasiblePreimage:
    """argmin ||C x - g_tilde||^2 over ||x|| <= sqrt(n) * x_bound, in eigen-coordinates.

    In the basis I_d kron V the objective separates into
    ``sum lam_j z^2 - beta z`` per (feature, component), so the trust-region
    solver applies directly. Numerically zero singular values are dropped:
    their linear terms vanish and the minimum-norm solution puts 0 there.
    """
    if x_bound < 0:
        raise ValueError("x_bound must be nonnegative")
    d, n = spec.d, spec.n
    beta = eigenbasis_coords(spec, g_tilde).reshape(d, spec.k)
    keep = spec.rank_mask()
    coords = np.zeros((d, spec.k))
    if not np.any(keep):
        return FeasiblePreimage(coords.ravel(), 0.0, np.zeros(d * spec.l))

    lam = spec.sq_singular_over_n2[keep]
    # component-major order keeps the eigenvalues sorted nonincreasing
    problem = TrustRegionProblem(
        eigenvalues=np.repeat(lam, d),
        rhs_coords=beta[:, keep].T.ravel(),
        radius=math.sqrt(n) * x_bound,
    )
    z, mu = trust_region_solve(problem)
    coords[:, keep] = z.reshape(keep.sum(), d).T

    if mu == 0.0 and keep.all() and spec.k == spec.l:
        # C is onto and the ball is inactive, so g_tilde is itself feasible;
        # returning it avoids the round trip through the eigenbasis
        return FeasiblePreimage(coords.ravel(), mu, np.array(g_tilde, dtype=float).ravel())

    s = spec.svd.singular_values
    g_hat = ((coords[:, keep] * s[keep]) @ spec.svd.left[:, keep].T) / n
    return FeasiblePreimage(coords.ravel(), mu, g_hat.ravel())


def project_onto_feasible(spec: KroneckerSpectrum, g_tilde, x_bound: float) -> np.ndarray:
    """Euclidean projection of g_tilde onto K = C(ball of radius sqrt(n) * x_bound)."""
    return solve_feasible_preimage(spec, g_tilde, x_bound).g_hat


def projection_noise_scale(x_bound: float, y: OutcomeMatrix, b: PrivacyBudget) -> float:
    """Per-query noise ``c(b) * 2 * max_i ||y^i|| * x_bound / n`` (replace-one sensitivity)."""
    return calibration_constant(b) * 2.0 * y.max_row_norm * x_bound / y.n


@dataclass(frozen=True)
class ProjectionRelease:
    g_hat: np.ndarray
    g_tilde: np.ndarray
    radius: float
    multiplier: float
    x_norm: float


def projection_mechanism(
    x: DesignMatrix,
    y: OutcomeMatrix,
    b: PrivacyBudget,
    rng: np.random.Generator,
    spec: KroneckerSpectrum | None = None,
) -> ProjectionRelease:
    """Noisy query answers projected back onto the answers of feasible datasets.

    Private in X only (Y is treated as public). ``spec`` may be passed in when
    the same Y is reused; otherwise it is computed here.
    """
    g = true_answers(x, y)
    r = projection_noise_scale(x.x_bound, y, b)
    g_tilde = g + r * rng.standard_normal(g.size)
    if spec is None:
        spec = kron_spectrum(y, x.d)
    pre = solve_feasible_preimage(spec, g_tilde, x.x_bound)
    return ProjectionRelease(
        g_hat=pre.g_hat, g_tilde=g_tilde, radius=r, multiplier=pre.multiplier, x_norm=pre.x_norm
    )
