import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trainbound.errors import DomainError
from trainbound.models import BilinearModel, GainDistribution, XorModel, bilinear_mi, xor_mi_closed
from trainbound.optimize import (
    BoundaryFlag,
    asymptotic_rate_opt,
    asymptotic_tau_opt,
    golden_section_max,
    optimal_tau,
    rate_objective,
    small_a_tau_opt,
)


def xor_mi(a):
    model = XorModel(a)
    return lambda tau: xor_mi_closed(model, tau)


def dense_grid_opt(a, points):
    """Independent oracle: brute-force argmax of (1 - tau)(1 - exp(-tau/a)) on a uniform grid."""
    taus = np.linspace(0.0, 1.0, points + 2)[1:-1]
    rates = (1.0 - taus) * -np.expm1(-taus / a)
    best = int(np.argmax(rates))
    return taus[best], rates[best]


def stationarity_residual(a, tau):
    return abs((1.0 - tau) * math.exp(-tau / a) / a - (1.0 - math.exp(-tau / a)))


class TestRateObjective:
    def test_examples(self):
        np.testing.assert_allclose(rate_objective(xor_mi(1.0), 0.5), 0.196735, atol=5e-7)
        np.testing.assert_allclose(rate_objective(lambda t: 0.8, 0.25), 0.6, atol=1e-15)
        assert rate_objective(xor_mi(1.0), 1.0 - 1e-12) < 1e-11

    @pytest.mark.parametrize("tau", [0.0, 1.0, -0.1])
    def test_domain(self, tau):
        with pytest.raises(DomainError):
            rate_objective(xor_mi(1.0), tau)


class TestGoldenSection:
    def test_parabola(self):
        x, fx = golden_section_max(lambda x: -((x - 0.3) ** 2), 0.0, 1.0, 1e-10)
        np.testing.assert_allclose(x, 0.3, atol=1e-6)
        np.testing.assert_allclose(fx, 0.0, atol=1e-12)

    def test_plateau_keeps_left(self):
        x, _ = golden_section_max(lambda x: 1.0, 0.0, 1.0, 1e-8)
        assert x < 1e-7


class TestOptimalTau:
    def test_one_over_e(self):
        a = 1.0 / math.e
        r = optimal_tau(xor_mi(a))
        np.testing.assert_allclose(r.tau_opt, 0.367879, atol=1e-6)
        np.testing.assert_allclose(r.rate_opt, (1 - 1 / math.e) ** 2, atol=1e-6)
        np.testing.assert_allclose(r.rate_opt, 0.399576, atol=1e-6)
        assert r.boundary_flag is BoundaryFlag.INTERIOR

    def test_a_one(self):
        r = optimal_tau(xor_mi(1.0))
        np.testing.assert_allclose(r.tau_opt, 0.44, atol=0.005)

    def test_a_hundred_against_dense_grid(self):
        r = optimal_tau(xor_mi(100.0))
        tau_grid, _ = dense_grid_opt(100.0, 10**6)
        np.testing.assert_allclose(r.tau_opt, 0.5, atol=0.01)
        np.testing.assert_allclose(r.tau_opt, tau_grid, atol=2e-6)

    def test_result_invariants(self):
        r = optimal_tau(xor_mi(0.7))
        assert 0.0 <= r.tau_opt <= 1.0
        np.testing.assert_allclose(r.rate_opt, rate_objective(xor_mi(0.7), r.tau_opt), rtol=1e-14)
        assert r.rate_opt >= max(r.objective.values) - 1e-12
        assert len(r.objective) == 1000

    @pytest.mark.parametrize("a", np.geomspace(0.01, 100.0, 25))
    def test_stationarity(self, a):
        r = optimal_tau(xor_mi(float(a)))
        assert stationarity_residual(a, r.tau_opt) < 1e-8

    @pytest.mark.parametrize("a", [1e-3, 0.05, 1 / math.e, 1.0, 4.0, 100.0])
    def test_sound_against_grid(self, a):
        r = optimal_tau(xor_mi(a))
        _, grid_rate = dense_grid_opt(a, 10**5)
        assert r.rate_opt >= grid_rate - 1e-9

    def test_bilinear_sound(self):
        model = BilinearModel()
        r = optimal_tau(lambda t: bilinear_mi(model, t))
        taus = np.linspace(0.0, 1.0, 10**5 + 2)[1:-1]
        assert r.rate_opt >= np.max((1 - taus) * bilinear_mi(model, 0.0)) - 1e-9
        assert r.boundary_flag is BoundaryFlag.AT_ZERO
        assert r.tau_opt == 0.0
        np.testing.assert_allclose(r.rate_opt, bilinear_mi(model, 0.0), rtol=1e-12)

    def test_flat_objective_breaks_toward_zero(self):
        r = optimal_tau(lambda t: 0.25 / (1.0 - t))
        assert r.boundary_flag is BoundaryFlag.AT_ZERO
        np.testing.assert_allclose(r.rate_opt, 0.25, rtol=1e-12)

    def test_at_one(self):
        r = optimal_tau(lambda t: t / (1.0 - t))
        assert r.boundary_flag is BoundaryFlag.AT_ONE
        assert r.tau_opt == 1.0
        np.testing.assert_allclose(r.rate_opt, 1.0, atol=1e-9)

    def test_two_humps_finds_global(self):
        # a local maximum near 0.2 and the global one near 0.8
        def mi(t):
            bump = 0.6 * math.exp(-((t - 0.2) / 0.05) ** 2) + math.exp(-((t - 0.8) / 0.05) ** 2)
            return bump / (1.0 - t)

        r = optimal_tau(mi)
        np.testing.assert_allclose(r.tau_opt, 0.8, atol=1e-6)

    def test_bad_settings(self):
        with pytest.raises(DomainError):
            optimal_tau(xor_mi(1.0), grid_points=10)
        with pytest.raises(DomainError):
            optimal_tau(xor_mi(1.0), refine_tol=0.0)


class TestAsymptotes:
    def test_examples(self):
        np.testing.assert_allclose(asymptotic_tau_opt(1e-3)["small_a"], 6.9078e-3, atol=5e-8)
        np.testing.assert_allclose(asymptotic_tau_opt(1 / math.e)["small_a"], 0.367879, atol=5e-7)
        for a in (1e-3, 0.5, 2.0, 1e3):
            assert asymptotic_tau_opt(a)["large_a"] == 0.5
        assert "small_a" not in asymptotic_tau_opt(2.0)

    def test_small_form_domain(self):
        with pytest.raises(DomainError):
            small_a_tau_opt(1.0)
        with pytest.raises(DomainError):
            asymptotic_tau_opt(0.0)

    def test_small_a_ratio(self):
        a = 1e-4
        ratio = optimal_tau(xor_mi(a)).tau_opt / small_a_tau_opt(a)
        assert 0.85 <= ratio <= 1.15
        tau_grid, _ = dense_grid_opt(a, 10**6)
        assert 0.85 <= tau_grid / small_a_tau_opt(a) <= 1.15

    def test_approach_half(self):
        gaps = [abs(optimal_tau(xor_mi(a)).tau_opt - 0.5) for a in (1.0, 10.0, 100.0, 1000.0)]
        assert all(x > y for x, y in zip(gaps, gaps[1:]))

    def test_rate_limits(self):
        for a, key in ((1e-4, "small_a"), (1e3, "large_a")):
            r = optimal_tau(xor_mi(a))
            np.testing.assert_allclose(r.rate_opt, asymptotic_rate_opt(a)[key], rtol=2e-3)

    def test_dividing_line(self):
        for a in np.geomspace(1e-3, 1e3, 40):
            tau = optimal_tau(xor_mi(float(a))).tau_opt
            if a < 1 / math.e * 0.999:
                assert tau > a
            elif a > 1 / math.e * 1.001:
                assert tau < a


class TestOptimizerProperties:
    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(0.01, 100.0))
    def test_rate_dominates_samples(self, a):
        r = optimal_tau(xor_mi(a))
        assert r.rate_opt >= max(r.objective.values) - 1e-12
        assert r.boundary_flag is BoundaryFlag.INTERIOR
        assert stationarity_residual(a, r.tau_opt) < 1e-8

    @settings(max_examples=20, deadline=None)
    @given(mean=st.floats(-3.0, 3.0), std=st.floats(0.1, 3.0))
    def test_bilinear_always_at_zero(self, mean, std):
        model = BilinearModel(GainDistribution.normal(mean, std))
        r = optimal_tau(lambda t: bilinear_mi(model, t))
        assert r.boundary_flag is BoundaryFlag.AT_ZERO
        assert r.tau_opt == 0.0
