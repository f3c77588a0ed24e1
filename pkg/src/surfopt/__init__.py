"""Differentiable ordered-surface inference with a primal-dual interior point solver."""
from .batch import FieldDiagnostics, SurfaceField, infer_from_maps, solve_field
from .column_model import (TIGHT_PARAMS, ColumnProblem, ConstraintSpec, SolverParams,
                           build_adjacency_matrix, build_bounded_constraints, surface_cost)
from .errors import (BatchFailureError, InfeasibleSpecError, InvalidDimensionError,
                     InvalidDistributionError, InvalidLabelError, InvalidParameterError,
                     InvalidSpecError, NonConvergenceError, OracleFailureError,
                     StaleSolutionError, SurfOptError)
from .ipm import BackwardGradients, Solution, backward, solve, solve_and_grad
from .losses import LossReport, total_loss
from .metrics import EvalReport, masd
from .oracles import GradCheckReport, active_set_oracle, pav_isotonic, run_gradcheck_suite
from .surface_head import FusionParams, ProbabilityField, parameterize_field
from .synth import SynthSpec, synth_generate

__version__ = "0.1.0"

__all__ = [
    "BackwardGradients",
    "BatchFailureError",
    "ColumnProblem",
    "ConstraintSpec",
    "EvalReport",
    "FieldDiagnostics",
    "FusionParams",
    "GradCheckReport",
    "InfeasibleSpecError",
    "InvalidDimensionError",
    "InvalidDistributionError",
    "InvalidLabelError",
    "InvalidParameterError",
    "InvalidSpecError",
    "LossReport",
    "NonConvergenceError",
    "OracleFailureError",
    "ProbabilityField",
    "Solution",
    "SolverParams",
    "StaleSolutionError",
    "SurfOptError",
    "SurfaceField",
    "SynthSpec",
    "TIGHT_PARAMS",
    "active_set_oracle",
    "backward",
    "build_adjacency_matrix",
    "build_bounded_constraints",
    "infer_from_maps",
    "masd",
    "parameterize_field",
    "pav_isotonic",
    "run_gradcheck_suite",
    "solve",
    "solve_and_grad",
    "solve_field",
    "surface_cost",
    "synth_generate",
    "total_loss",
]
