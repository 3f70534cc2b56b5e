"""Lasso estimation and diagnostics for serially dependent, high-dimensional
regressions."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Coefficients,
    CovarianceMatrix,
    InvalidInputError,
    RegressionProblem,
    sample_covariance,
    seed_stream,
    vector_norm,
    vector_norms,
)
from .lasso import LassoFit, LassoPath, SolverOptions, certify_kkt, fit_lasso, fit_path_bic, soft_threshold  # noqa: E402

__all__ = [
    "Coefficients",
    "CovarianceMatrix",
    "InvalidInputError",
    "RegressionProblem",
    "sample_covariance",
    "seed_stream",
    "vector_norm",
    "vector_norms",
    "LassoFit",
    "LassoPath",
    "SolverOptions",
    "certify_kkt",
    "fit_lasso",
    "fit_path_bic",
    "soft_threshold",
]
