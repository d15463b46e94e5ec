"""Tabular laboratory for regularized offline preference alignment.

Link functions, exact regularized solvers, estimators, end-to-end
alignment algorithms, preference games and the canonical hard instances.
"""

from .core import (
    ContextDataset,
    DomainError,
    Instance,
    PreferenceDataset,
    ShapeError,
    SolverError,
    expected_return,
    greedy_policy,
    regret,
)
from .divergences import CoverageReport, coverage
from .links import KL, AlphaMixed, LinkSpec, MixedChi2, lambert_w0, link_inverse, link_value
from .solvers import mirror_step, solve_regularized, solve_smoothed_chi2
from .estimation import ObjectiveConfig, FitOptions, mle_finite, sample_preferences
from .algorithms import (
    IterativeChiPOConfig,
    RewardInduced,
    TabularLogit,
    run_chi2_rlhf,
    run_iterative_chipo,
    run_offline_alignment,
)
from .games import PreferenceFunction, duality_gap, minimax_winner
from .instances import general_lower, illustrative, rpo_lower

__all__ = [
    "AlphaMixed", "ContextDataset", "CoverageReport", "DomainError", "FitOptions", "Instance",
    "IterativeChiPOConfig", "KL", "LinkSpec", "MixedChi2", "ObjectiveConfig", "PreferenceDataset",
    "PreferenceFunction", "RewardInduced", "ShapeError", "SolverError", "TabularLogit", "coverage",
    "duality_gap", "expected_return", "general_lower", "greedy_policy", "illustrative", "lambert_w0",
    "link_inverse", "link_value", "minimax_winner", "mirror_step", "mle_finite", "regret",
    "rpo_lower", "run_chi2_rlhf", "run_iterative_chipo", "run_offline_alignment", "sample_preferences",
    "solve_regularized", "solve_smoothed_chi2",
]
