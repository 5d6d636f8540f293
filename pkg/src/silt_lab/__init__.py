"""Simulation and variational toolkit for intersection local times of lattice walks."""

from .errors import ConfigError, ConvergenceError, DomainError, ParameterError
from .gaussian_field import FieldSample, NormStats, lp_norm, norm_statistics, sample_field
from .intersection import IntersectionValue, fold, lq_norm, milt, silt
from .isomorphism import TestFunctional, analytic_linear_check, lhs_estimate, rhs_estimate
from .lattice_walk import LocalTimeField, WalkConfig, confined_sample, simulate_batch, simulate_local_times
from .mc import MCEstimate
from .torus_green import SpectralKernel, build_kernel, green_infinite, green_value, heat_kernel_zero
from .variational import VariationalSolution, rho1, rho1_critical_trend, rho2, sobolev_constant
from .experiments import (ExperimentConfig, confinement_lower_bound, exp_moment,
                          tail_probability)

__all__ = [
    "ConfigError", "ConvergenceError", "DomainError", "ParameterError",
    "FieldSample", "NormStats", "lp_norm", "norm_statistics", "sample_field",
    "IntersectionValue", "fold", "lq_norm", "milt", "silt",
    "TestFunctional", "analytic_linear_check", "lhs_estimate", "rhs_estimate",
    "LocalTimeField", "WalkConfig", "confined_sample", "simulate_batch", "simulate_local_times",
    "MCEstimate",
    "SpectralKernel", "build_kernel", "green_infinite", "green_value", "heat_kernel_zero",
    "VariationalSolution", "rho1", "rho1_critical_trend", "rho2", "sobolev_constant",
    "ExperimentConfig", "confinement_lower_bound", "exp_moment", "tail_probability",
]
