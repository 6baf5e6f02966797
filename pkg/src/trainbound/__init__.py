"""Training-based mutual information lower bound for large-scale systems."""

__version__ = "0.1.0"

from .derivatives import (
    A2Report,
    DerivativeConfig,
    MiCurve,
    check_a2,
    data_derivative,
    mi_curve,
    mutual_info_limit,
    right_derivative,
    training_derivative,
)
from .entropy import Branch, EntropySurface, Ratios, ScaledEntropy, eval_surface, scale_entropy
from .errors import A2ViolationError, BudgetExceededError, DomainError, NumericalError
from .finite import (
    EnumerationInstance,
    FiniteBlockResult,
    coupon_expected_unique,
    enumerate_entropy,
    enumerate_mi,
    mc_entropy,
    xor_finite_mi,
    xor_finite_tau_opt,
)
from .models import (
    BilinearModel,
    GainDistribution,
    XorModel,
    bilinear_bound,
    bilinear_mi,
    xor_mi_closed,
    xor_scaled_entropy_closed,
    xor_surface,
)
from .optimize import BoundaryFlag, TrainingAnalysis, asymptotic_tau_opt, optimal_tau, rate_objective
