"""Coupled simulation and verification of step-reinforced random walks."""

from .coefficients import CoefficientTable, build_coefficients
from .diagnostics import (bracket_counterbalanced, bracket_mixed, bracket_reinforced, bracket_walk_cross,
                          brackets, jump_sup, martingale_transform, scaled_brackets, scaled_paths)
from .laws import StepLaw, discrete, gaussian, parse_law, rademacher, truncate_law
from .limits import (GaussianEnsemble, LimitCovarianceModel, NumericalDegeneracyError, TimeGrid,
                     driver_correlation, limit_covariance, reinforced_bm_time_change, sample_limit_triplet)
from .moments import MomentOracle, exact_moments
from .stats import Check, EnsembleSummary, TestReport, empirical_moments
from .walks import (CoupledPath, PathBatch, ReinforcementParams, simulate_batch, simulate_coupled,
                    simulate_decomposed, simulate_ensemble)

__all__ = [
    "CoefficientTable", "build_coefficients",
    "bracket_counterbalanced", "bracket_mixed", "bracket_reinforced", "bracket_walk_cross", "brackets",
    "jump_sup", "martingale_transform", "scaled_brackets", "scaled_paths",
    "StepLaw", "discrete", "gaussian", "parse_law", "rademacher", "truncate_law",
    "GaussianEnsemble", "LimitCovarianceModel", "NumericalDegeneracyError", "TimeGrid",
    "driver_correlation", "limit_covariance", "reinforced_bm_time_change", "sample_limit_triplet",
    "MomentOracle", "exact_moments",
    "Check", "EnsembleSummary", "TestReport", "empirical_moments",
    "CoupledPath", "PathBatch", "ReinforcementParams", "simulate_batch", "simulate_coupled",
    "simulate_decomposed", "simulate_ensemble",
]
