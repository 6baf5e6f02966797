"""Built-in models.

XOR bit flipping: y_t = x_t XOR s_{k_t}, with a*T iid fair channel bits s and
known uniform channel selections k_t.  Its entropy surface is

    F(tau, eps) = (a/tau)(1 - exp(-tau/a)) + eps - 1.

Bilinear gain: y_t = h x_t + v_t with a single unknown scalar gain h.  One
unknown is learned perfectly from any positive training fraction, so the
bound (1 - tau)/2 E log2(1 + h^2) is maximized at tau = 0.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import roots_hermite

from .entropy import EntropySurface
from .errors import DomainError, NumericalError


@dataclass(frozen=True)
class XorModel:
    a: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"a={self.a!r} must be a positive finite number")


def _revealed_fraction(tau: float, a: float) -> float:
    """(a/tau)(1 - exp(-tau/a)) without cancellation for small tau/a."""
    return (a / tau) * -math.expm1(-tau / a)


def xor_surface(model: XorModel) -> EntropySurface:
    a = model.a

    def func(tau, epsilon):
        return _revealed_fraction(tau, a) + epsilon - 1.0

    return EntropySurface(func=func, name=f"xor(a={a:g})")


def xor_scaled_entropy_closed(model: XorModel, tau: float, epsilon: float, delta: float) -> float:
    """Piecewise H(Y_eps | X_delta) for the XOR model, written out directly."""
    if not (0.0 < tau < 1.0):
        raise DomainError(f"tau={tau!r} must lie in (0, 1)")
    top = 1.0 / tau
    for name, v in (("epsilon", epsilon), ("delta", delta)):
        if not (0.0 < v <= top * (1.0 + 1e-12)):
            raise DomainError(f"{name}={v!r} must lie in (0, 1/tau]")
    a = model.a
    if epsilon <= delta:
        return (a / tau) * -math.expm1(-tau * epsilon / a)
    return (a / tau) * -math.expm1(-tau * delta / a) + (epsilon - delta)


def xor_data_derivative_closed(model: XorModel, tau: float, epsilon: float, delta: float = 1.0) -> float:
    """dH(Y_eps|X_delta)/deps: exp(-tau eps / a) before delta, 1 after."""
    if epsilon == delta:
        raise DomainError("derivative is not defined at epsilon == delta")
    return math.exp(-tau * epsilon / model.a) if epsilon < delta else 1.0


def xor_training_derivative_closed(model: XorModel, tau: float, epsilon: float) -> float:
    return math.exp(-tau * epsilon / model.a)


def xor_mi_closed(model: XorModel, tau: float) -> float:
    """1 - exp(-tau/a): the chance a data symbol's channel was seen in training."""
    if not (0.0 < tau < 1.0):
        raise DomainError(f"tau={tau!r} must lie in (0, 1)")
    return -math.expm1(-tau / model.a)


@dataclass(frozen=True)
class GainDistribution:
    """Scalar gain law.

    ``kind`` is "normal" (parameters mean, std; integrated by Gauss-Hermite),
    "point" (parameter value; exact) or "custom" (``sampler`` required;
    Monte Carlo).  ``density`` is informational for custom laws.
    """

    kind: str = "normal"
    mean: float = 0.0
    std: float = 1.0
    value: float = 0.0
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    density: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in ("normal", "point", "custom"):
            raise DomainError(f"unknown gain distribution kind {self.kind!r}")
        if self.kind == "normal" and not self.std >= 0:
            raise DomainError("std must be nonnegative")
        if self.kind == "custom" and self.sampler is None:
            raise DomainError("custom gain distributions need a sampler")

    @classmethod
    def normal(cls, mean: float = 0.0, std: float = 1.0) -> "GainDistribution":
        return cls(kind="normal", mean=mean, std=std)

    @classmethod
    def point(cls, value: float) -> "GainDistribution":
        return cls(kind="point", value=value)

    @classmethod
    def custom(cls, sampler, density=None) -> "GainDistribution":
        return cls(kind="custom", sampler=sampler, density=density)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.mean, self.std, size)
        if self.kind == "point":
            return np.full(size, self.value, dtype=float)
        return np.asarray(self.sampler(rng, size), dtype=float)


@dataclass(frozen=True)
class BilinearModel:
    gain_dist: GainDistribution = field(default_factory=GainDistribution)
    log_base: float = 2.0

    def __post_init__(self):
        if self.log_base != 2.0:
            raise DomainError("the bilinear model is fixed to base-2 logarithms")


def _log2_gain(h):
    return np.log2(1.0 + np.square(h))


def gauss_hermite_expectation(func, mean: float, std: float, nodes: int) -> float:
    """E[func(X)] for X ~ N(mean, std^2) with an n-node Gauss-Hermite rule."""
    x, w = roots_hermite(nodes)
    return float(np.sum(w * func(mean + math.sqrt(2.0) * std * x)) / math.sqrt(math.pi))


def expected_log_gain(
    model: BilinearModel,
    quadrature_nodes: int = 32,
    *,
    max_nodes: int = 4096,
    change_tol: float = 1e-10,
    mc_samples: int = 1_000_000,
    seed: int = 0,
) -> float:
    """E[log2(1 + h^2)].

    Normal gains: Gauss-Hermite with node doubling until successive values
    change by at most ``change_tol``.  Wide normals put the singularity of
    log(1 + h^2) at h = +/-i close to the scaled real axis and stall the
    doubling; those fall back to adaptive quadrature.  Custom gains: Monte
    Carlo.
    """
    dist = model.gain_dist
    if dist.kind == "point":
        return float(_log2_gain(dist.value))
    if dist.kind == "custom":
        est, _ = monte_carlo_log_gain(model, mc_samples, seed)
        return est
    if quadrature_nodes < 16:
        raise DomainError("quadrature_nodes must be >= 16")
    if dist.std == 0:
        return float(_log2_gain(dist.mean))
    return _normal_log_gain(dist.mean, dist.std, quadrature_nodes, max_nodes, change_tol)


@functools.lru_cache(maxsize=128)
def _normal_log_gain(mean: float, std: float, nodes: int, max_nodes: int, change_tol: float) -> float:
    n = nodes
    prev = gauss_hermite_expectation(_log2_gain, mean, std, n)
    while n < max_nodes:
        n *= 2
        cur = gauss_hermite_expectation(_log2_gain, mean, std, n)
        if not math.isfinite(cur):
            break
        if abs(cur - prev) <= change_tol:
            return cur
        prev = cur
    return _adaptive_log_gain(mean, std, change_tol)


def _adaptive_log_gain(mean: float, std: float, change_tol: float) -> float:
    def integrand(z):
        return _log2_gain(mean + std * z) * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    # split where h = 0, the bottom of the log(1 + h^2) well
    z0 = -mean / std
    left, err_l = integrate.quad(integrand, -np.inf, z0, epsabs=change_tol, epsrel=1e-13, limit=200)
    right, err_r = integrate.quad(integrand, z0, np.inf, epsabs=change_tol, epsrel=1e-13, limit=200)
    if not err_l + err_r <= 100.0 * change_tol:
        raise NumericalError(f"E[log2(1 + h^2)] did not converge (error estimate {err_l + err_r:.3g})")
    return float(left + right)


def monte_carlo_log_gain(model: BilinearModel, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo E[log2(1 + h^2)] and its standard error."""
    rng = np.random.default_rng(seed)
    values = _log2_gain(model.gain_dist.sample(rng, samples))
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))


def bilinear_mi(model: BilinearModel, tau: float, quadrature_nodes: int = 32) -> float:
    """Per-symbol information once the gain is known: E[log2(1 + h^2)] / 2, for any tau."""
    if not (0.0 <= tau < 1.0):
        raise DomainError(f"tau={tau!r} must lie in [0, 1)")
    return _half_log_gain(model, quadrature_nodes)


@functools.lru_cache(maxsize=64)
def _half_log_gain(model: BilinearModel, quadrature_nodes: int) -> float:
    # tau-independent, and Monte Carlo for custom gains is costly
    return 0.5 * expected_log_gain(model, quadrature_nodes)


def bilinear_bound(model: BilinearModel, tau: float, quadrature_nodes: int = 32) -> float:
    """(1 - tau)/2 * E[log2(1 + h^2)], bits per channel use."""
    if tau == 1.0:
        return 0.0
    return (1.0 - tau) * bilinear_mi(model, tau, quadrature_nodes)
