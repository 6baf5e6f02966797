"""Entropy derivatives and the large-scale conditional mutual information.

The per-dimension mutual information of a fresh data symbol given the
training record is the gap between two one-sided epsilon-derivatives at
eps = 1:

    cI(tau) = d/deps H(Y_eps | X)        (data phase, training record fixed)
            - d/deps H(Y_eps | X_eps)    (training phase, inputs grow with outputs)

Both derivatives are taken numerically from an :class:`EntropySurface`
with forward differences and Richardson extrapolation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .entropy import EntropySurface, eval_surface, scale_entropy
from .errors import A2ViolationError, DomainError, NegativeMutualInformationWarning, NumericalError


@dataclass(frozen=True)
class DerivativeConfig:
    """Finite-difference settings.

    ``limit_offset`` and ``limit_levels`` control the extrapolated one-sided
    limits used by :func:`check_a2`: the derivative is sampled at
    ``1 +/- limit_offset / 2**k`` for ``k < limit_levels``.
    """

    step: float = 1e-4
    richardson_levels: int = 3
    tolerance: float = 1e-5
    limit_offset: float = 1e-2
    limit_levels: int = 4

    def __post_init__(self):
        if not self.step > 0:
            raise DomainError(f"step must be positive, got {self.step}")
        if self.richardson_levels < 1:
            raise DomainError("richardson_levels must be >= 1")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be positive")
        if not self.limit_offset > 0 or self.limit_levels < 1:
            raise DomainError("limit_offset must be positive and limit_levels >= 1")


DEFAULT_CONFIG = DerivativeConfig()


@dataclass(frozen=True)
class A2Report:
    training_gap: float
    data_gap: float
    tolerance: float
    tau: float
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "passed", self.training_gap <= self.tolerance and self.data_gap <= self.tolerance
        )


@dataclass(frozen=True)
class MiCurve:
    """Sampled tau -> cI(tau), bits per receiver dimension."""

    taus: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.taus) != len(self.values):
            raise ValueError("taus and values must have the same length")
        if any(not (0.0 < t < 1.0) for t in self.taus):
            raise DomainError("taus must lie in (0, 1)")
        if any(b <= a for a, b in zip(self.taus, self.taus[1:])):
            raise ValueError("taus must be strictly increasing")
        if any(not (v >= 0.0 and math.isfinite(v)) for v in self.values):
            raise ValueError("mutual information values must be finite and nonnegative")

    def __len__(self):
        return len(self.taus)


def _richardson(estimates: Sequence[float]) -> float:
    """Extrapolate estimates taken at scales s, s/2, s/4, ... to s -> 0.

    Assumes an error expansion c1 s + c2 s^2 + ...; with n estimates the
    leading n - 1 terms are removed.
    """
    row = list(estimates)
    for m in range(1, len(row)):
        factor = 2.0**m
        row = [(factor * row[j + 1] - row[j]) / (factor - 1.0) for j in range(len(row) - 1)]
    return row[0]


def _finite(value: float, where: str) -> float:
    if not math.isfinite(value):
        raise NumericalError(f"non-finite value {value} at {where}")
    return value


def _one_sided(f: Callable[[float], float], x0: float, cfg: DerivativeConfig, sign: float) -> float:
    f0 = _finite(f(x0), f"x={x0}")
    levels = cfg.richardson_levels
    diffs = []
    for k in range(levels, -1, -1):
        h = sign * cfg.step * 2.0**k
        fh = _finite(f(x0 + h), f"x={x0 + h}")
        diffs.append((fh - f0) / h)
    return _richardson(diffs)


def _fit_step(cfg: DerivativeConfig, room: float) -> DerivativeConfig:
    """Shrink the step so the whole stencil stays within ``room`` of x0."""
    if not room > 0:
        raise DomainError("no room for a one-sided difference stencil inside the domain")
    reach = cfg.step * 2.0**cfg.richardson_levels
    if reach <= room:
        return cfg
    return DerivativeConfig(
        step=room / 2.0**cfg.richardson_levels,
        richardson_levels=cfg.richardson_levels,
        tolerance=cfg.tolerance,
        limit_offset=cfg.limit_offset,
        limit_levels=cfg.limit_levels,
    )


def right_derivative(f: Callable[[float], float], x0: float, cfg: DerivativeConfig = DEFAULT_CONFIG) -> float:
    """Right derivative of f at x0.

    Uses only f on [x0, x0 + 2**levels * step]; exact for polynomials of
    degree <= richardson_levels + 1 up to rounding.
    """
    return _one_sided(f, x0, cfg, 1.0)


def left_derivative(f: Callable[[float], float], x0: float, cfg: DerivativeConfig = DEFAULT_CONFIG) -> float:
    return _one_sided(f, x0, cfg, -1.0)


def data_derivative(surface: EntropySurface, tau: float, epsilon: float, cfg: DerivativeConfig = DEFAULT_CONFIG) -> float:
    """dH(Y_eps | X)/deps, the next-output entropy once training is over."""
    if epsilon < 1.0:
        raise DomainError(f"data-phase derivative needs epsilon >= 1, got {epsilon}")
    cfg = _fit_step(cfg, surface.epsilon_max(tau) - epsilon)
    return right_derivative(lambda e: eval_surface(surface, tau, e), epsilon, cfg)


def _training_entropy(surface: EntropySurface, tau: float) -> Callable[[float], float]:
    return lambda e: scale_entropy(surface, tau, e, e).value


def training_derivative(surface: EntropySurface, tau: float, epsilon: float, cfg: DerivativeConfig = DEFAULT_CONFIG) -> float:
    """dH(Y_eps | X_eps)/deps, the next-output entropy when its input is known."""
    if surface.iid_inputs:
        if not epsilon > 0.0:
            raise DomainError(f"training derivative needs epsilon > 0, got {epsilon}")
    elif epsilon < 1.0:
        raise DomainError(f"training derivative needs epsilon >= 1 without iid inputs, got {epsilon}")
    cfg = _fit_step(cfg, 1.0 / tau - epsilon)
    return right_derivative(_training_entropy(surface, tau), epsilon, cfg)


def _limit_offset(cfg: DerivativeConfig, tau: float) -> float:
    room = 1.0 / tau - 1.0
    if not room > 0:
        raise DomainError(f"tau={tau} leaves no data phase to take limits in")
    return min(cfg.limit_offset, room / 4.0)


def check_a2(surface: EntropySurface, tau: float, cfg: DerivativeConfig = DEFAULT_CONFIG) -> A2Report:
    """Numerically test continuity of the entropy derivatives at eps = 1.

    training gap: derivative of H(Y_eps|X_eps) at eps = 1 against its limit
    from eps > 1.  With iid inputs the value at 1 is approached from the
    training side, so a kink at the boundary shows up as a gap; otherwise
    only the right derivative is available.

    data gap: limit of dH(Y_eps|X)/deps from eps > 1 against the limit of
    dH(Y_eps|X_delta)/deps at eps = 1 as delta rises to 1.
    """
    if not (0.0 < tau < 1.0):
        raise DomainError(f"tau={tau!r} must lie in (0, 1)")
    h0 = _limit_offset(cfg, tau)
    offsets = [h0 / 2.0**k for k in range(cfg.limit_levels)]

    g = _training_entropy(surface, tau)
    if surface.iid_inputs:
        training_at_one = left_derivative(g, 1.0, _fit_step(cfg, 1.0))
    else:
        training_at_one = training_derivative(surface, tau, 1.0, cfg)
    training_limit = _richardson([training_derivative(surface, tau, 1.0 + s, cfg) for s in offsets])

    data_limit = _richardson([data_derivative(surface, tau, 1.0 + s, cfg) for s in offsets])
    fitted = _fit_step(cfg, 1.0 / tau - 1.0)
    below = []
    for s in offsets:
        delta = 1.0 - s
        below.append(right_derivative(lambda e, d=delta: scale_entropy(surface, tau, e, d).value, 1.0, fitted))
    data_from_below = _richardson(below)

    training_gap = abs(_finite(training_at_one - training_limit, "training gap"))
    data_gap = abs(_finite(data_limit - data_from_below, "data gap"))
    return A2Report(training_gap=training_gap, data_gap=data_gap, tolerance=cfg.tolerance, tau=tau)


def mutual_info_limit(
    surface: EntropySurface,
    tau: float,
    cfg: DerivativeConfig = DEFAULT_CONFIG,
    *,
    override_a2: bool = False,
) -> float:
    """cI(tau) in bits per receiver dimension.

    Raises A2ViolationError when the boundary-continuity check fails, unless
    ``override_a2`` is set (which also skips the check).  Negative results
    within ``cfg.tolerance`` are rounding and become 0; larger negative
    values are clamped with a NegativeMutualInformationWarning.
    """
    if not (0.0 < tau < 1.0):
        raise DomainError(f"tau={tau!r} must lie in (0, 1)")
    if not override_a2:
        report = check_a2(surface, tau, cfg)
        if not report.passed:
            raise A2ViolationError(
                f"{surface.name}: A2 check failed at tau={tau} "
                f"(training gap {report.training_gap:.3g}, data gap {report.data_gap:.3g}, "
                f"tolerance {report.tolerance:.3g})",
                report,
            )
    value = data_derivative(surface, tau, 1.0, cfg) - training_derivative(surface, tau, 1.0, cfg)
    if value < 0.0:
        if value < -cfg.tolerance:
            warnings.warn(
                f"{surface.name}: mutual information {value:.3g} < 0 at tau={tau}; clamped to 0",
                NegativeMutualInformationWarning,
                stacklevel=2,
            )
        value = 0.0
    return value


def mi_curve(
    surface: EntropySurface,
    taus: Sequence[float],
    cfg: DerivativeConfig = DEFAULT_CONFIG,
    *,
    override_a2: bool = False,
) -> MiCurve:
    taus = tuple(float(t) for t in taus)
    values = tuple(mutual_info_limit(surface, t, cfg, override_a2=override_a2) for t in taus)
    return MiCurve(taus=taus, values=values)
