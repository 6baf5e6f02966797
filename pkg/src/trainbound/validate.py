"""Cross-checks bundled for the ``validate`` command.

Each suite returns a :class:`Check` with the tolerance it was held to and
the worst error it saw.  Suites that cannot run (enumeration with a zero
budget) report ``status == "skipped"`` rather than failing.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .derivatives import DerivativeConfig, check_a2, data_derivative, mutual_info_limit, training_derivative
from .entropy import EntropySurface, eval_surface, scale_entropy
from .errors import BudgetExceededError
from .finite import (
    EnumerationInstance,
    coupon_expected_unique,
    enumerate_entropy,
    enumerate_mi,
    enumeration_states,
    xor_finite_mi,
)
from .models import (
    BilinearModel,
    XorModel,
    expected_log_gain,
    monte_carlo_log_gain,
    xor_mi_closed,
    xor_scaled_entropy_closed,
    xor_surface,
)
from .optimize import optimal_tau


@dataclass
class Check:
    name: str
    tolerance: float
    observed: Optional[float]
    status: str  # "pass", "fail" or "skipped"
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"

    def to_dict(self):
        return asdict(self)


def _verdict(name, tolerance, observed, detail="") -> Check:
    ok = observed is not None and math.isfinite(observed) and observed <= tolerance
    return Check(name, tolerance, observed, "pass" if ok else "fail", detail)


def perturbed_surface(surface: EntropySurface, size: float = 1e-6) -> EntropySurface:
    """A deliberately wrong copy of ``surface`` used to prove the checks can fail."""
    return EntropySurface(
        func=lambda tau, eps: surface.func(tau, eps) + size * eps * (1.0 + tau),
        name=surface.name + "+fault",
        tau_bounds=surface.tau_bounds,
        iid_inputs=surface.iid_inputs,
    )


def random_triples(rng: np.random.Generator, size: int):
    """(a, tau, eps, delta) with tau in [0.01, 0.99] and eps, delta in (0, 1/tau]."""
    a = np.exp(rng.uniform(math.log(0.05), math.log(20.0), size))
    tau = rng.uniform(0.01, 0.99, size)
    eps = rng.uniform(0.0, 1.0, size) * (1.0 / tau)
    delta = rng.uniform(0.0, 1.0, size) * (1.0 / tau)
    eps = np.maximum(eps, 1e-9)
    delta = np.maximum(delta, 1e-9)
    return a, tau, eps, delta


def scaling_equivalence(size: int = 20_000, seed: int = 0, inject_fault: bool = False) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for a, tau, eps, delta in zip(*random_triples(rng, size)):
        model = XorModel(float(a))
        surface = xor_surface(model)
        if inject_fault:
            surface = perturbed_surface(surface)
        got = scale_entropy(surface, float(tau), float(eps), float(delta)).value
        want = xor_scaled_entropy_closed(model, float(tau), float(eps), float(delta))
        worst = max(worst, abs(got - want))
    return _verdict("scaling_equivalence", 1e-12, worst, f"{size} random (a, tau, eps, delta) points")


def scaling_branches(size: int = 5_000, seed: int = 1) -> Check:
    """scale_entropy against the two direct substitutions eps F(eps tau, 1) and delta F(delta tau, eps/delta)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for a, tau, eps, delta in zip(*random_triples(rng, size)):
        surface = xor_surface(XorModel(float(a)))
        tau, eps, delta = float(tau), float(eps), float(delta)
        got = scale_entropy(surface, tau, eps, delta).value
        if eps <= delta:
            want = eps * eval_surface(surface, eps * tau, 1.0)
        else:
            want = delta * eval_surface(surface, delta * tau, min(eps / delta, 1.0 / (delta * tau)))
        worst = max(worst, abs(got - want))
    return _verdict("scaling_branches", 1e-12, worst, f"{size} random points")


def derivative_closed_form(cfg: DerivativeConfig, n_a: int = 10, n_tau: int = 10, n_eps: int = 10) -> Check:
    worst = 0.0
    count = 0
    for a in np.geomspace(0.1, 10.0, n_a):
        surface = xor_surface(XorModel(float(a)))
        for tau in np.linspace(0.05, 0.9, n_tau):
            top = 1.0 / tau
            for eps in np.linspace(1.0, 1.0 + 0.9 * (top - 1.0), n_eps):
                tau_f, eps_f = float(tau), float(eps)
                worst = max(worst, abs(data_derivative(surface, tau_f, eps_f, cfg) - 1.0))
                want = math.exp(-tau_f * eps_f / a)
                worst = max(worst, abs(training_derivative(surface, tau_f, eps_f, cfg) - want))
                count += 1
    return _verdict("derivative_closed_form", 1e-6, worst, f"{count} (a, tau, eps) points")


def mi_pipeline(cfg: DerivativeConfig, n_a: int = 10, n_tau: int = 10) -> tuple[Check, Check]:
    worst = 0.0
    worst_gap = 0.0
    count = 0
    for a in np.geomspace(0.05, 20.0, n_a):
        model = XorModel(float(a))
        surface = xor_surface(model)
        for tau in np.linspace(0.02, 0.98, n_tau):
            report = check_a2(surface, float(tau), cfg)
            worst_gap = max(worst_gap, report.training_gap, report.data_gap)
            value = mutual_info_limit(surface, float(tau), cfg, override_a2=True)
            worst = max(worst, abs(value - xor_mi_closed(model, float(tau))))
            count += 1
    return (
        _verdict("a2_checks", cfg.tolerance, worst_gap, f"{count} (a, tau) points"),
        _verdict("mi_closed_form", 1e-6, worst, f"{count} (a, tau) points"),
    )


def _instances(budget: int, max_n: int, max_t: int):
    done, skipped = [], 0
    for n in range(1, max_n + 1):
        for t in range(max_t + 1):
            if enumeration_states(n, t) <= budget:
                done.append((n, t))
            else:
                skipped += 1
    return done, skipped


def oracle_agreement(budget: int, max_n: int = 6, max_t: int = 6) -> Check:
    done, skipped = _instances(budget, max_n, max_t)
    if not done:
        return Check("oracle_agreement", 0.0, None, "skipped", f"budget {budget} admits no instance")
    worst = Fraction(0)
    for n, t in done:
        inst = EnumerationInstance(n, t, budget=budget)
        exact = enumerate_mi(inst)
        closed = xor_finite_mi(Fraction(n, t + 1), t + 1, t, exact=True)
        worst = max(worst, abs(Fraction(exact) - closed))
    return _verdict("oracle_agreement", 0.0, float(worst), f"{len(done)} instances exact, {skipped} over budget")


def entropy_identity(budget: int, max_n: int = 6, max_t: int = 6) -> Check:
    done, skipped = _instances(budget, max_n, max_t)
    if not done:
        return Check("entropy_identity", 0.0, None, "skipped", f"budget {budget} admits no instance")
    worst = Fraction(0)
    for n, t in done:
        try:
            got = enumerate_entropy(EnumerationInstance(n, t, budget=budget))
        except BudgetExceededError:
            continue
        worst = max(worst, abs(Fraction(got) - coupon_expected_unique(n, t, exact=True)))
    return _verdict("entropy_identity", 0.0, float(worst), f"{len(done)} instances, {skipped} over budget")


def finite_limit() -> Check:
    """Finite-T conditional MI approaches 1 - exp(-tau/a) faster than 2/(aT)."""
    worst_ratio = 0.0
    for a in (0.25, 1.0, 4.0):
        for T in (100, 1000, 10_000):
            for tau in (0.1, 0.3, 0.5, 0.7):
                T_tau = round(tau * T)
                gap = abs(xor_finite_mi(a, T, T_tau) - xor_mi_closed(XorModel(a), T_tau / T))
                worst_ratio = max(worst_ratio, gap / (2.0 / (a * T)))
    return _verdict("finite_limit", 1.0, worst_ratio, "gap / (2/(aT)), must stay below 1")


def bilinear_quadrature(samples: int, seed: int) -> Check:
    model = BilinearModel()
    quad = expected_log_gain(model)
    est, se = monte_carlo_log_gain(model, samples, seed)
    return _verdict("bilinear_quadrature", 3.0, abs(quad - est) / se, f"|quad - MC| in standard errors, {samples} samples")


def optimizer_anchor(grid_points: int, refine_tol: float) -> Check:
    a = 1.0 / math.e
    result = optimal_tau(lambda t: xor_mi_closed(XorModel(a), t), grid_points, refine_tol)
    err = max(abs(result.tau_opt - a), abs(result.rate_opt - (1.0 - a) ** 2))
    return _verdict("optimizer_anchor", 1e-6, err, "a = 1/e: tau_opt = 1/e, rate = (1 - 1/e)^2")


def run_all(
    cfg: DerivativeConfig,
    *,
    budget: int,
    samples: int = 1_000_000,
    seed: int = 0,
    grid_points: int = 1000,
    refine_tol: float = 1e-8,
    inject_fault: bool = False,
    size: int = 20_000,
) -> list[Check]:
    checks = [
        scaling_equivalence(size, seed, inject_fault),
        scaling_branches(max(size // 4, 100), seed + 1),
        derivative_closed_form(cfg),
        *mi_pipeline(cfg),
        oracle_agreement(budget),
        entropy_identity(budget),
        finite_limit(),
        bilinear_quadrature(samples, seed),
        optimizer_anchor(grid_points, refine_tol),
    ]
    return checks
