"""Gamma-smoothed NPMLE for Poisson means."""

from ._core import (
    CoverageRule,
    EvaluationError,
    GammaMixtureModel,
    InputError,
    NonConvergenceError,
    PreconditionError,
    build_rule,
    chi_square_quantile,
    contains,
    dkw_eta,
    estimate_kappa,
    exact_coverage,
    fit_npmle,
    gamma_quantile,
    garwood_interval,
    log_gamma,
    optimality_gap,
    reg_lower_gamma,
    reg_upper_gamma,
    run_coverage_study,
)

__all__ = [
    "CoverageRule",
    "EvaluationError",
    "GammaMixtureModel",
    "InputError",
    "NonConvergenceError",
    "PreconditionError",
    "build_rule",
    "chi_square_quantile",
    "contains",
    "dkw_eta",
    "estimate_kappa",
    "exact_coverage",
    "fit_npmle",
    "gamma_quantile",
    "garwood_interval",
    "log_gamma",
    "optimality_gap",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "run_coverage_study",
]
