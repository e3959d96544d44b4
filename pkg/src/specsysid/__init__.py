"""Spectral structure, power-norm bounds and single-trajectory least squares for LTI systems."""

from ._validation import NumericalOverflowError, RankDeficientError
from .covariance import build_sigma, expected_distance, frobenius_formula, moment_norm_bounds, trace_formulas
from .estimators import InvariantSubspaceTransformer, OLSIdentifier
from .ols import elementwise_error, error_sandwiches, inverse_cov_constraints, negative_second_moment, ols_estimate
from .power_bounds import certificate, exact_power_norms, global_threshold, lower_bound_witness, per_block_threshold
from .simulation import lipschitz_constant, row_blocks, simulate
from .spectral import EigenBlockSpec, build_structured, decompose, jordan_block, solve_lyapunov

__version__ = "0.1.0"

__all__ = [
    "EigenBlockSpec",
    "InvariantSubspaceTransformer",
    "NumericalOverflowError",
    "OLSIdentifier",
    "RankDeficientError",
    "build_sigma",
    "build_structured",
    "certificate",
    "decompose",
    "elementwise_error",
    "error_sandwiches",
    "exact_power_norms",
    "expected_distance",
    "frobenius_formula",
    "global_threshold",
    "inverse_cov_constraints",
    "jordan_block",
    "lipschitz_constant",
    "lower_bound_witness",
    "moment_norm_bounds",
    "negative_second_moment",
    "ols_estimate",
    "per_block_threshold",
    "row_blocks",
    "simulate",
    "solve_lyapunov",
    "trace_formulas",
]
