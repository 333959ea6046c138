"""Stable and unstable manifolds of degenerate relaxation systems ``A u' = Q(u)``."""

__version__ = "0.1.0"

from .model import ModelSystem, ValidationReport, builtin_model, check_kawashima, validate_hypotheses
from .reduction import ReducedSystem, builtin_reduced, decompose, lift, reduce, schur_reduce
from .spectral import SpectralData, green_function, projections, resolvent, spectral_factorize
from .multiplier import GridFunction, apply_K, apply_Km, example47_lower_bound
from .linearization import scan_invertibility
from .manifold import SolverConfig, default_config, solve_fixed_point

__all__ = [
    "ModelSystem", "ValidationReport", "builtin_model", "check_kawashima", "validate_hypotheses",
    "ReducedSystem", "builtin_reduced", "decompose", "lift", "reduce", "schur_reduce",
    "SpectralData", "green_function", "projections", "resolvent", "spectral_factorize",
    "GridFunction", "apply_K", "apply_Km", "example47_lower_bound",
    "scan_invertibility", "SolverConfig", "default_config", "solve_fixed_point",
]
