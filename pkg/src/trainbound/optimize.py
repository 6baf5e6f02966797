"""Training-fraction optimization: maximize (1 - tau) * cI(tau) over tau."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .derivatives import MiCurve
from .errors import DomainError, NumericalError

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# Relative gap below which two objective values count as tied.
TIE_RTOL = 1e-12


class BoundaryFlag(enum.Enum):
    INTERIOR = "Interior"
    AT_ZERO = "AtZero"
    AT_ONE = "AtOne"


@dataclass(frozen=True)
class TrainingAnalysis:
    """Optimum of the training objective plus the sampled curve it came from.

    ``objective`` holds (1 - tau) * cI(tau) on the scan grid.  For a boundary
    optimum ``tau_opt`` is the boundary itself and ``rate_opt`` the limiting
    objective value there.
    """

    tau_opt: float
    rate_opt: float
    objective: MiCurve
    boundary_flag: BoundaryFlag


def rate_objective(mi: Callable[[float], float], tau: float) -> float:
    if not (0.0 < tau < 1.0):
        raise DomainError(f"tau={tau!r} must lie in (0, 1)")
    return (1.0 - tau) * mi(tau)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Maximize a unimodal f on (lo, hi); returns (x, f(x)).

    Only interior points are evaluated.  On equal values the left part of the
    bracket is kept, so plateaus resolve toward smaller x.
    """
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    if fc >= fd:
        return c, fc
    return d, fd


def _polish(objective: Callable[[float], float], tau: float, lo: float, hi: float, width: float) -> float:
    """Sharpen a golden-section optimum by bisecting on the sign of a central difference.

    Comparing objective values cannot place a smooth maximum closer than about
    sqrt(machine epsilon); the sign of f(x + h) - f(x - h) can.  The search
    stays within ``width`` of ``tau`` and is abandoned when the signs at the
    ends do not bracket a maximum (noisy or flat objectives).
    """
    h = 1e-3 * (hi - lo)
    left = max(tau - width, lo + h)
    right = min(tau + width, hi - h)
    if not left < right:
        return tau

    def slope(x):
        return objective(x + h) - objective(x - h)

    if not (slope(left) > 0.0 > slope(right)):
        return tau
    for _ in range(200):
        mid = 0.5 * (left + right)
        if mid in (left, right):
            break
        if slope(mid) > 0.0:
            left = mid
        else:
            right = mid
    return 0.5 * (left + right)


def _limit_at(objective: Callable[[float], float], edge: float, inward: float) -> float:
    """Linear extrapolation of the objective to a boundary point."""
    h = 1e-6
    f1 = objective(edge + inward * h)
    f2 = objective(edge + inward * 2.0 * h)
    return 2.0 * f1 - f2


def optimal_tau(
    mi: Callable[[float], float],
    grid_points: int = 1000,
    refine_tol: float = 1e-8,
) -> TrainingAnalysis:
    """Grid scan over [tau_min, 1 - tau_min], then golden-section refinement.

    An interior optimum is then polished with a central-difference bisection
    (see :func:`_polish`) so that the first-order condition holds to well
    below ``refine_tol``.

    ``tau_min = 1 / (2 grid_points)``.  The refinement bracket is the pair of
    grid neighbours of the best grid point, extended to 0 or 1 at the edges.
    An optimum that ends within ``refine_tol`` of 0 or 1 is reported as a
    boundary optimum.  Values within ``TIE_RTOL`` (relative) of each other
    are ties and resolve toward smaller tau.
    """
    if grid_points < 100:
        raise DomainError("grid_points must be >= 100")
    if not refine_tol > 0:
        raise DomainError("refine_tol must be positive")

    def objective(tau: float) -> float:
        value = rate_objective(mi, tau)
        if not math.isfinite(value):
            raise NumericalError(f"objective is {value} at tau={tau}")
        return value

    tau_min = 1.0 / (2 * grid_points)
    taus = np.linspace(tau_min, 1.0 - tau_min, grid_points)
    values = np.array([objective(float(t)) for t in taus])
    top = float(np.max(values))
    best = int(np.flatnonzero(values >= top - TIE_RTOL * abs(top))[0])  # ties go to smaller tau

    lo = float(taus[best - 1]) if best > 0 else 0.0
    hi = float(taus[best + 1]) if best < grid_points - 1 else 1.0
    tau_star, rate_star = golden_section_max(objective, lo, hi, refine_tol)
    if values[best] > rate_star:
        tau_star, rate_star = float(taus[best]), float(values[best])
    elif refine_tol < tau_star < 1.0 - refine_tol:
        polished = _polish(objective, tau_star, lo, hi, 100.0 * refine_tol)
        polished_rate = objective(polished)
        if polished_rate >= rate_star - 4.0 * np.finfo(float).eps * abs(rate_star):
            tau_star, rate_star = polished, max(polished_rate, rate_star)

    flag = BoundaryFlag.INTERIOR
    if lo == 0.0 and tau_star > refine_tol:
        edge = _limit_at(objective, 0.0, 1.0)
        if edge >= rate_star - TIE_RTOL * abs(rate_star):
            tau_star = 0.0
    if tau_star <= refine_tol:
        flag = BoundaryFlag.AT_ZERO
        tau_star, rate_star = 0.0, max(_limit_at(objective, 0.0, 1.0), rate_star)
    elif tau_star >= 1.0 - refine_tol:
        flag = BoundaryFlag.AT_ONE
        tau_star, rate_star = 1.0, max(_limit_at(objective, 1.0, -1.0), 0.0)

    curve = MiCurve(taus=tuple(float(t) for t in taus), values=tuple(float(max(v, 0.0)) for v in values))
    return TrainingAnalysis(tau_opt=tau_star, rate_opt=rate_star, objective=curve, boundary_flag=flag)


def small_a_tau_opt(a: float) -> float:
    """-a ln a, the optimum as a -> 0; only meaningful for 0 < a < 1."""
    if not a > 0:
        raise DomainError(f"a={a!r} must be positive")
    if a >= 1.0:
        raise DomainError(f"the small-a form -a ln a needs a < 1, got {a}")
    return -a * math.log(a)


def asymptotic_tau_opt(a: float) -> dict[str, float]:
    """Limiting optima of (1 - tau)(1 - exp(-tau/a)).

    ``large_a`` is always 1/2; ``small_a`` (-a ln a) is present only for a < 1.
    """
    if not a > 0:
        raise DomainError(f"a={a!r} must be positive")
    out = {"large_a": 0.5}
    if a < 1.0:
        out["small_a"] = small_a_tau_opt(a)
    return out


def asymptotic_rate_opt(a: float) -> dict[str, float]:
    """Matching optimal rates: (1 + a ln a)(1 - a) as a -> 0, (1 - exp(-1/(2a)))/2 as a -> inf."""
    if not a > 0:
        raise DomainError(f"a={a!r} must be positive")
    out = {"large_a": 0.5 * -math.expm1(-0.5 / a)}
    if a < 1.0:
        out["small_a"] = (1.0 + a * math.log(a)) * (1.0 - a)
    return out
