"""Functional Hodrick-Prescott filter with a data-driven smoothing operator."""

__version__ = "0.1.0"

from .basis import BasisSpec, SampledCurve, choose_truncation, eval_basis, project, project_series, reconstruct, reconstruct_series
from .diffop import apply_P, apply_Pt, kernel_Z, solve_smoother
from .functional_hp import (
    DiagonalOperator,
    FilterResult,
    estimate_B,
    estimate_components,
    estimate_Sigma_u,
    estimate_Sigma_v,
    filter_trend,
    functional_objective,
    optimal_B,
)
from .model_sim import ModelParams, conditional_expectation, mc_consistency, risk_curve, simulate, verify_optimality
from .scalar_hp import ScalarEstimate, estimate_alpha, estimate_mu, estimate_tau, hp_filter

__all__ = [
    "BasisSpec",
    "DiagonalOperator",
    "FilterResult",
    "ModelParams",
    "SampledCurve",
    "ScalarEstimate",
    "apply_P",
    "apply_Pt",
    "choose_truncation",
    "conditional_expectation",
    "estimate_B",
    "estimate_Sigma_u",
    "estimate_Sigma_v",
    "estimate_alpha",
    "estimate_components",
    "estimate_mu",
    "estimate_tau",
    "eval_basis",
    "filter_trend",
    "functional_objective",
    "hp_filter",
    "kernel_Z",
    "mc_consistency",
    "optimal_B",
    "project",
    "project_series",
    "reconstruct",
    "reconstruct_series",
    "risk_curve",
    "simulate",
    "solve_smoother",
    "verify_optimality",
]
