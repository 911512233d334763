"""Tests for the asymptotic right-hand sides."""

import math

import numpy as np
import pandas as pd
import pytest

from arrivals.models import (
    BoundedBelowArrivals,
    InhomogeneousPoissonArrivals,
    MixingLaw,
    PoissonArrivals,
    RenewalArrivals,
)
from asymptotics.rhs import (
    AsymptoticValue,
    discounted_mean_integral,
    finite_rhs,
    infinite_rhs,
    mrv_rhs,
    write_asymptotic_csv,
)
from core.errors import AssumptionError, DivergenceError


class TestDiscountedMeanIntegral:
    """int exp(-s t) m(dt)."""

    def test_poisson_finite(self):
        value = discounted_mean_integral(PoissonArrivals(rate=1.0), 0.1, 10.0)
        assert value.method == "exact-closed-form"
        assert value.value == pytest.approx(6.32121, abs=1e-5)

    def test_poisson_infinite(self):
        assert discounted_mean_integral(PoissonArrivals(rate=1.0), 0.1, math.inf).value == pytest.approx(10.0)

    def test_renewal_infinite_uses_laplace_series(self):
        value = discounted_mean_integral(RenewalArrivals(), 0.1, math.inf)
        assert value.method == "exact-closed-form"
        assert value.value == pytest.approx(10.0)

    def test_gamma_mixing_sums_the_series(self):
        model = BoundedBelowArrivals(a=0.5, mixing=MixingLaw(kind="gamma", shape=2.0, scale=0.5))
        value = discounted_mean_integral(model, 1.0, math.inf)
        assert value.method == "quadrature"
        assert 0 < value.value < math.exp(-0.5) / (1 - math.exp(-0.5))

    def test_inhomogeneous_infinite_integrates(self):
        model = InhomogeneousPoissonArrivals(rate0=1.0, beta=0.5, period=1.0)
        value = discounted_mean_integral(model, 0.5, math.inf)
        assert value.method == "quadrature"
        # the sine term contributes beta * omega / (s^2 + omega^2)
        omega = 2 * math.pi
        assert value.value == pytest.approx(1 / 0.5 + 0.5 * omega / (0.25 + omega ** 2), rel=1e-6)

    def test_zero_discount_infinite_diverges(self):
        with pytest.raises(DivergenceError):
            discounted_mean_integral(PoissonArrivals(), 0.0, math.inf)


class TestFiniteRhs:
    """int_0^T P(X exp(-r s) in xA) m(ds)."""

    def test_product_of_oracles(self, pareto_polar, sum_set):
        value = finite_rhs(pareto_polar, PoissonArrivals(rate=1.0), sum_set, 0.05, 10.0, 10.0)
        assert value.value == pytest.approx(1.5803e-3, rel=1e-4)
        assert value.method == "exact-closed-form"

    def test_zero_interest_reduces_to_tail_times_mean(self, pareto_polar, orthant_set):
        value = finite_rhs(pareto_polar, PoissonArrivals(rate=2.0), orthant_set, 0.0, 3.0, 10.0)
        assert value.value == pytest.approx(0.01 * 6.0)

    def test_zero_interest_outside_pure_power(self, pareto_polar, sum_set):
        value = finite_rhs(pareto_polar, PoissonArrivals(rate=2.0), sum_set, 0.0, 3.0, 0.2)
        assert value.value == pytest.approx(pareto_polar.tail(sum_set, 0.2) * 6.0)

    def test_horizon_before_first_arrival(self, pareto_polar, sum_set):
        value = finite_rhs(pareto_polar, BoundedBelowArrivals(a=2.0), sum_set, 0.05, 1.0, 10.0)
        assert value.value == 0.0

    def test_generic_integral_outside_pure_power(self, pareto_polar, sum_set):
        # x < 0.5 keeps part of the horizon in the saturated region of the tail
        value = finite_rhs(pareto_polar, PoissonArrivals(rate=1.0), sum_set, 0.5, 4.0, 0.2)
        assert value.method == "quadrature"
        assert 0 < value.value < 4.0

    def test_rejects_infinite_horizon(self, pareto_polar, sum_set):
        with pytest.raises(ValueError, match="finite"):
            finite_rhs(pareto_polar, PoissonArrivals(), sum_set, 0.05, math.inf, 10.0)

    @pytest.mark.parametrize("arrivals", [
        PoissonArrivals(rate=1.0),
        InhomogeneousPoissonArrivals(rate0=1.0, beta=0.5, period=1.0),
    ], ids=["poisson", "inhom-poisson"])
    def test_monotone_in_x_T_and_r(self, pareto_polar, sum_set, arrivals):
        def value(r=0.05, T=10.0, x=10.0):
            return finite_rhs(pareto_polar, arrivals, sum_set, r, T, x).value

        in_x = np.array([value(x=x) for x in [0.2, 1.0, 5.0, 20.0]])
        in_T = np.array([value(T=T) for T in [1.0, 5.0, 10.0, 20.0]])
        in_r = np.array([value(r=r) for r in [0.0, 0.05, 0.2, 0.5]])
        assert np.all(np.diff(in_x) <= 1e-8 * in_x[:-1])
        assert np.all(np.diff(in_T) >= -1e-8 * in_T[:-1])
        assert np.all(np.diff(in_r) <= 1e-8 * in_r[:-1])


class TestInfiniteRhs:
    """int_0^inf P(X exp(-r s) in xA) m(ds)."""

    def test_poisson_pure_power(self, pareto_polar, orthant_set):
        value = infinite_rhs(pareto_polar, PoissonArrivals(rate=1.0), orthant_set, 0.05, 10.0)
        assert value.value == pytest.approx(0.1)

    def test_doubling_scales_by_power(self, pareto_polar, orthant_set):
        arrivals = PoissonArrivals(rate=1.0)
        small = infinite_rhs(pareto_polar, arrivals, orthant_set, 0.05, 10.0).value
        large = infinite_rhs(pareto_polar, arrivals, orthant_set, 0.05, 20.0).value
        assert large / small == pytest.approx(0.25)

    def test_bounded_below_is_below_poisson(self, pareto_polar, orthant_set):
        bounded = BoundedBelowArrivals(a=0.1, mixing=MixingLaw(kind="constant", value=1.0), base_rate=1 / 0.9)
        value = infinite_rhs(pareto_polar, bounded, orthant_set, 0.05, 10.0, q1=1.9, q2=2.1)
        ratio = math.exp(-0.01) / 1.09
        assert value.value == pytest.approx(0.01 * ratio / (1 - ratio), rel=1e-9)
        assert value.value < 0.1

    def test_generic_quadrature_below_pure_power(self, pareto_polar, orthant_set):
        value = infinite_rhs(pareto_polar, PoissonArrivals(rate=1.0), orthant_set, 0.5, 0.5)
        assert value.method == "quadrature"
        assert value.converged
        # P(R > 0.5 e^{0.5 s}) = 1 on s < 2 log 2, then 4 e^{-s}
        expected = 2 * math.log(2.0) + 1.0
        assert value.value == pytest.approx(expected, rel=1e-6)

    def test_needs_positive_interest(self, pareto_polar, orthant_set):
        with pytest.raises(DivergenceError, match="r > 0"):
            infinite_rhs(pareto_polar, PoissonArrivals(), orthant_set, 0.0, 10.0)

    def test_moment_window_is_checked(self, pareto_polar, orthant_set):
        with pytest.raises(AssumptionError, match="q1 < J-"):
            infinite_rhs(pareto_polar, PoissonArrivals(), orthant_set, 0.05, 10.0, q1=3.0, q2=5.0)


class TestMrvRhs:
    """mu(A) V(x) int exp(-alpha r s) m(ds)."""

    def test_matches_finite_rhs(self):
        value = mrv_rhs(2.0, 0.25, lambda x: x ** -2.0, PoissonArrivals(rate=1.0), 0.05, 10.0, 10.0)
        assert value.value == pytest.approx(1.5803e-3, rel=1e-4)

    def test_infinite_horizon(self):
        value = mrv_rhs(2.0, 0.25, lambda x: x ** -2.0, PoissonArrivals(rate=1.0), 0.05, math.inf, 10.0)
        assert value.value == pytest.approx(0.025)

    def test_zero_interest(self):
        value = mrv_rhs(2.0, 0.25, lambda x: x ** -2.0, PoissonArrivals(rate=1.0), 0.0, 10.0, 10.0)
        assert value.value == pytest.approx(0.25 * 0.01 * 10.0)

    def test_rejects_zero_mass(self):
        with pytest.raises(ValueError, match="mu"):
            mrv_rhs(2.0, 0.0, lambda x: x ** -2.0, PoissonArrivals(), 0.05, 10.0, 10.0)


class TestAsymptoticValue:
    """Provenance container."""

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError, match="Unknown method"):
            AsymptoticValue(value=1.0, method="guess")

    def test_clips_round_off(self):
        assert AsymptoticValue(value=-1e-18, method="quadrature").value == 0.0

    def test_csv_columns(self, tmp_path):
        rows = [AsymptoticValue(value=0.1, method="exact-closed-form").to_row(10.0)]
        frame = pd.read_csv(write_asymptotic_csv(rows, tmp_path / "asymptotic.csv"))
        assert list(frame.columns) == ['x', 'asymptotic', 'method', 'error_bound']
        assert frame['asymptotic'].iloc[0] == pytest.approx(0.1)
