"""Forward-backward splitting for weakly convex plus smooth convex objectives,
with convergence diagnostics and a binary tomography application."""

from .errors import ConfigError, ConvergenceError, DimensionError, ParameterError, SolutionReached
from .linalg import CsrMatrix, matvec, matvec_transpose, operator_norm_estimate
from .functions import (BallDistanceTerm, BinaryPenalty, CompositeProblem, SpherePenalty,
                        ball_projection, binary_penalty_prox, binary_penalty_value,
                        binary_tomography_problem, dist_term_gradient, dist_term_value,
                        norm_prox, reformulate_problem, sphere_penalty_prox, sphere_penalty_value)
from .inexact import EpsProxCertificate, SurrogateSpec, certify_eps_solution, eps_prox, surrogate_value
from .diagnostics import (Thresholds, compute_thresholds, contraction_factor, dist_to_binary_set,
                          eps_criticality_check, rate_fit, sharpness_probe)
from .solver import SolverConfig, ParamReport, Trajectory, fb_step, run_fb, validate_parameters

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ConvergenceError", "DimensionError", "ParameterError", "SolutionReached",
    "CsrMatrix", "matvec", "matvec_transpose", "operator_norm_estimate",
    "BallDistanceTerm", "BinaryPenalty", "CompositeProblem", "SpherePenalty", "ball_projection",
    "binary_penalty_prox", "binary_penalty_value", "binary_tomography_problem",
    "dist_term_gradient", "dist_term_value", "norm_prox", "reformulate_problem",
    "sphere_penalty_prox", "sphere_penalty_value",
    "EpsProxCertificate", "SurrogateSpec", "certify_eps_solution", "eps_prox", "surrogate_value",
    "Thresholds", "compute_thresholds", "contraction_factor", "dist_to_binary_set",
    "eps_criticality_check", "rate_fit", "sharpness_probe",
    "SolverConfig", "ParamReport", "Trajectory", "fb_step", "run_fb", "validate_parameters",
]
