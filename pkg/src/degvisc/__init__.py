"""Solver and verification toolkit for degenerate convection-diffusion
equations with source terms,

    u_t + div f(u) = eps * Laplace A(u) + g(t, x, u),

and for their vanishing-viscosity limit towards Kruzhkov entropy solutions.
"""

__version__ = "0.1.0"

from degvisc.grid import GridSpec, GridFunction, Trajectory
from degvisc.model import (
    FluxSpec, DiffusionSpec, SourceSpec, InitialDatum, GridDatum, ModelSpec,
    HypothesisReport, InvalidModelError, validate_hypotheses)
from degvisc.scenarios import builtin_model, SCENARIOS
from degvisc.mollify import MollifierKernel, MollifiedFamily, mollify_model, verify_family
from degvisc.solver import (
    stable_dt, reference_dt, step, solve, solve_reference, InstabilityError,
    BoundaryContaminationWarning)
from degvisc.entropy import (
    EntropyPair, TestFunction, EntropyProduction, kruzhkov_pair, quadratic_pair,
    affine_pair, weak_residual, entropy_residual, production_measure,
    decomposition_norms, standard_battery, residual_battery)
from degvisc.diagnostics import EstimateConstants, Record, VerificationReport
from degvisc.sweep import SweepPlan, ConvergenceTable, run_sweep, run_mu_study

__all__ = [
    "GridSpec", "GridFunction", "Trajectory",
    "FluxSpec", "DiffusionSpec", "SourceSpec", "InitialDatum", "GridDatum",
    "ModelSpec", "HypothesisReport", "InvalidModelError", "validate_hypotheses",
    "builtin_model", "SCENARIOS",
    "MollifierKernel", "MollifiedFamily", "mollify_model", "verify_family",
    "stable_dt", "reference_dt", "step", "solve", "solve_reference", "InstabilityError",
    "BoundaryContaminationWarning",
    "EntropyPair", "TestFunction", "EntropyProduction", "kruzhkov_pair",
    "quadratic_pair", "affine_pair", "weak_residual", "entropy_residual",
    "production_measure", "decomposition_norms", "standard_battery", "residual_battery",
    "EstimateConstants", "Record", "VerificationReport",
    "SweepPlan", "ConvergenceTable", "run_sweep", "run_mu_study",
]
