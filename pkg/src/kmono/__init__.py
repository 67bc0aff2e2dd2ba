"""Hermite spline interpolation, the k = 3 blow-up counterexample, and the
least-squares k-monotone density estimator with its knot-gap harness."""

from .counterexample import Method, blowup_scan, closed_form_deltas, cross_check, deltas, e5_at_zero
from .densities import CustomDensity, Exponential
from .errors import ConditioningError, ConvergenceError, DomainError
from .gap_experiment import (
    estimate_rate,
    inequality_audit,
    limit_constants,
    run_trial,
    simulate_Yk,
)
from .lse import LseFit, SampleSet, SolverConfig, extract_knots, fenchel_audit, fit_lse
from .spline_core import (
    HermiteData,
    HermiteOperator,
    KnotVector,
    PiecewisePoly,
    hermite_interpolate,
    interp_error,
    perfect_spline,
)

__all__ = [
    "ConditioningError", "ConvergenceError", "CustomDensity", "DomainError", "Exponential",
    "HermiteData", "HermiteOperator", "KnotVector", "LseFit", "Method", "PiecewisePoly",
    "SampleSet", "SolverConfig", "blowup_scan", "closed_form_deltas", "cross_check", "deltas",
    "e5_at_zero", "estimate_rate", "extract_knots", "fenchel_audit", "fit_lse",
    "hermite_interpolate", "inequality_audit", "interp_error", "limit_constants",
    "perfect_spline", "run_trial", "simulate_Yk",
]
