"""Differentially private least squares for many outcomes sharing one design matrix."""

from .data import DesignMatrix, OutcomeMatrix
from .privacy import PrivacyBudget, calibration_constant
from .query_release import kron_spectrum, project_onto_feasible, projection_mechanism
from .solvers import (
    Mechanism,
    PrimoSolution,
    SolverConfig,
    excess_loss,
    loss_ratio,
    naive_ssp_baseline,
    ols_ridge_solve,
    reuse_cov,
    subsample_reuse_cov,
)

__all__ = [
    "DesignMatrix",
    "OutcomeMatrix",
    "PrivacyBudget",
    "calibration_constant",
    "kron_spectrum",
    "project_onto_feasible",
    "projection_mechanism",
    "Mechanism",
    "PrimoSolution",
    "SolverConfig",
    "excess_loss",
    "loss_ratio",
    "naive_ssp_baseline",
    "ols_ridge_solve",
    "reuse_cov",
    "subsample_reuse_cov",
]
