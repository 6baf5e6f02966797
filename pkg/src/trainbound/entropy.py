"""Entropy surfaces and the change-of-variables scaling law.

A model enters the framework through a single function

    F(tau, eps) = lim (1 / (M_r T_tau)) H(y^{eps T_tau} | x^{T_tau}),   eps >= 1,

the conditional output entropy per receiver dimension per training symbol
(bits).  With iid inputs, the entropy of ``eps T_tau`` outputs given
``delta T_tau`` inputs follows from F alone:

    H(Y_eps | X_delta) = u * F(u * tau, (eps - u) / delta + 1),   u = min(eps, delta).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

from .errors import DomainError, NumericalError

# Relative slack on closed domain edges, so eps = 1/tau computed in floating
# point is not rejected by one ulp.
_EDGE_RTOL = 1e-12


@dataclass(frozen=True)
class Ratios:
    """Dimension ratios alpha = M_r / M_t and beta = T / M_t."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError(f"ratios must be positive, got alpha={self.alpha}, beta={self.beta}")

    @classmethod
    def from_dimensions(cls, n_tx: float, n_rx: float, block_length: float) -> "Ratios":
        if n_tx <= 0:
            raise DomainError("input dimension must be positive")
        return cls(alpha=n_rx / n_tx, beta=block_length / n_tx)


@dataclass(frozen=True)
class EntropySurface:
    """Model-supplied entropy surface F(tau, eps).

    ``func`` is evaluated on the rectangle-like region
    ``tau_bounds[0] < tau < tau_bounds[1]``, ``1 <= eps <= 1/tau``.
    ``iid_inputs`` declares that training inputs share the data-phase
    distribution; it lets training-phase derivatives be taken on both sides
    of eps = 1.
    """

    func: Callable[[float, float], float]
    name: str = "surface"
    tau_bounds: tuple[float, float] = (0.0, 1.0)
    iid_inputs: bool = True

    def in_domain(self, tau: float, epsilon: float) -> bool:
        lo, hi = self.tau_bounds
        if not (lo < tau < hi):
            return False
        return 1.0 <= epsilon <= (1.0 / tau) * (1.0 + _EDGE_RTOL)

    def epsilon_max(self, tau: float) -> float:
        return 1.0 / tau

    def __call__(self, tau: float, epsilon: float) -> float:
        return eval_surface(self, tau, epsilon)


class Branch(enum.Enum):
    EPS_LEQ_DELTA = "EpsLeqDelta"
    EPS_GT_DELTA = "EpsGtDelta"


@dataclass(frozen=True)
class ScaledEntropy:
    value: float
    tau: float
    epsilon: float
    delta: float
    branch: Branch

    def __float__(self):
        return self.value


def eval_surface(surface: EntropySurface, tau: float, epsilon: float) -> float:
    """Evaluate F(tau, epsilon), rejecting points outside the surface domain."""
    if not surface.in_domain(tau, epsilon):
        raise DomainError(
            f"{surface.name}: (tau={tau!r}, epsilon={epsilon!r}) outside "
            f"tau in {surface.tau_bounds}, 1 <= epsilon <= 1/tau"
        )
    value = float(surface.func(tau, epsilon))
    if not math.isfinite(value):
        raise NumericalError(f"{surface.name} returned {value} at tau={tau}, epsilon={epsilon}")
    return value


def _eval_closed_end(surface: EntropySurface, epsilon: float) -> float:
    hi = surface.tau_bounds[1]
    if abs(epsilon - 1.0) > _EDGE_RTOL * 4:
        raise DomainError(f"{surface.name}: epsilon={epsilon!r} must be 1 at tau={hi!r}")
    value = float(surface.func(hi, 1.0))
    if not math.isfinite(value):
        raise NumericalError(f"{surface.name} returned {value} at tau={hi}, epsilon=1")
    return value


def _check_multiplier(name: str, value: float, tau: float) -> None:
    if not (value > 0 and value <= (1.0 / tau) * (1.0 + _EDGE_RTOL)):
        raise DomainError(f"{name}={value!r} must lie in (0, 1/tau] = (0, {1.0 / tau!r}]")


def scale_entropy(surface: EntropySurface, tau: float, epsilon: float, delta: float) -> ScaledEntropy:
    """H(Y_eps | X_delta) from the surface via u * F(u tau, (eps - u)/delta + 1)."""
    if not (0.0 < tau < 1.0):
        raise DomainError(f"tau={tau!r} must lie in (0, 1)")
    _check_multiplier("epsilon", epsilon, tau)
    _check_multiplier("delta", delta, tau)

    if epsilon <= delta:
        u = epsilon
        stretch = 1.0
        branch = Branch.EPS_LEQ_DELTA
    else:
        u = delta
        # eps/delta <= 1/(delta tau) holds exactly; clip rounding spill-over.
        stretch = min((epsilon - u) / delta + 1.0, 1.0 / (u * tau))
        branch = Branch.EPS_GT_DELTA

    scaled_tau = u * tau
    if scaled_tau >= surface.tau_bounds[1] * (1.0 - _EDGE_RTOL):
        # u = 1/tau: the whole block is observed, the closed end of the domain.
        value = u * _eval_closed_end(surface, stretch)
    else:
        value = u * eval_surface(surface, scaled_tau, stretch)
    return ScaledEntropy(value=value, tau=tau, epsilon=epsilon, delta=delta, branch=branch)
