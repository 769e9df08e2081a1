"""Mutual-information privacy mechanisms for hypothesis testing.

Closed-form and SDP designs of leakage-constrained randomizers in the high
privacy regime, exact brute-force references for small alphabets, and
finite-sample Neyman-Pearson checks of the resulting error exponents.
"""

__version__ = "0.1.0"

from .binary import BinarySolution, Case, choose_direction, solve_binary, solve_binary_renyi, solve_dual_eta
from .design import design
from .estimators import EITMechanism
from .exceptions import (
    AbsoluteContinuityViolated, BudgetExceedsEntropy, DimensionTooLarge, MIPrivacyError, NegativeEntry,
    NoConvergence, NotInterior, NumericalFailure, ValidationError,
)
from .exponents import TestResult, exact_np_binary, mechanism_exponent_check
from .mary import SdpSolution, build_sdp, reconstruct, solve_binary_source_mary, solve_sdp
from .measures import (
    RenyiOrder, chi_squared_divergence, entropy, hellinger_divergence, kappa, mutual_information,
    relative_entropy, renyi_divergence,
)
from .mechanism import (
    EitProblem, Perturbation, approx_mutual_information, approx_relative_entropy, assemble, decompose,
    effective_leakage, perfect_mechanism,
)
from .oracle import GridSpec, compare_protocol, exact_put_2x2, grid_qcqp

__all__ = [
    "AbsoluteContinuityViolated", "BinarySolution", "BudgetExceedsEntropy", "Case", "DimensionTooLarge",
    "EITMechanism", "EitProblem", "GridSpec", "MIPrivacyError", "NegativeEntry", "NoConvergence",
    "NotInterior", "NumericalFailure", "Perturbation", "RenyiOrder", "SdpSolution", "TestResult",
    "ValidationError", "approx_mutual_information", "approx_relative_entropy", "assemble", "build_sdp",
    "chi_squared_divergence", "choose_direction", "compare_protocol", "decompose", "design",
    "effective_leakage", "entropy", "exact_np_binary", "exact_put_2x2", "grid_qcqp",
    "hellinger_divergence", "kappa", "mechanism_exponent_check", "mutual_information", "perfect_mechanism",
    "reconstruct", "relative_entropy", "renyi_divergence", "solve_binary", "solve_binary_renyi",
    "solve_binary_source_mary", "solve_dual_eta", "solve_sdp",
]
