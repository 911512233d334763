"""Tests for the arrival-process moment checks."""

import math

import numpy as np
import pytest

from arrivals.diagnostics import (
    check_factorial_moment_bound,
    check_moment_condition,
    check_wlod_window,
    geometric_tail,
    moment_exponent,
    moment_series_direct,
    moment_series_tail,
    truncation_count,
)
from arrivals.models import (
    BoundedBelowArrivals,
    InhomogeneousPoissonArrivals,
    InterArrivalLaw,
    MixingLaw,
    PoissonArrivals,
    RenewalArrivals,
    WLODArrivals,
)
from claims.claim_model import ClaimModel
from claims.radial import RadialLaw
from claims.spectral import SpectralMeasure
from core.errors import DivergenceError


class TestFactorialMoment:
    """alpha2(ds, dt) <= C m(ds) m(dt) off the diagonal."""

    def test_poisson_has_unit_constant(self):
        report = check_factorial_moment_bound(PoissonArrivals(rate=1.0), 5.0, 0.5, 100_000,
                                              np.random.default_rng(0))
        assert report.consistent_with(1.0)
        assert report.pooled_ratio == pytest.approx(1.0, abs=5 * report.pooled_stderr)
        assert report.ratios.shape == (10, 10)
        assert np.all(np.isnan(np.diag(report.ratios)))

    def test_inhomogeneous_poisson_has_unit_constant(self):
        model = InhomogeneousPoissonArrivals(rate0=1.0, beta=0.5, period=1.0)
        report = check_factorial_moment_bound(model, 2.0, 0.25, 100_000, np.random.default_rng(1))
        assert report.consistent_with(1.0)

    def test_bounded_below_before_first_arrival(self):
        model = BoundedBelowArrivals(a=1.0)
        report = check_factorial_moment_bound(model, 0.5, 0.1, 10_000, np.random.default_rng(2))
        assert report.trivially_holds
        assert report.c_hat == 0.0
        assert report.consistent_with(1.0)

    def test_rejects_infinite_horizon(self):
        with pytest.raises(ValueError, match="finite"):
            check_factorial_moment_bound(PoissonArrivals(), math.inf, 1.0, 100, np.random.default_rng(3))


class TestMomentSeries:
    """Summability of the discounted moment series."""

    def test_exponent(self):
        assert moment_exponent(0.5, 3.0) == 1.0
        assert moment_exponent(2.0, 3.0) == 3.0

    def test_geometric_tail(self):
        assert geometric_tail(0.5, 0) == pytest.approx(1.0)
        assert geometric_tail(0.5, 2) == pytest.approx(0.125 / 0.5)
        assert math.isinf(geometric_tail(1.0, 0))

    def test_bounded_below_closed_form(self):
        model = BoundedBelowArrivals(a=0.1)
        q = 2.1
        rho1 = math.exp(-1.9 * 0.1 / q)
        rho2 = math.exp(-2.1 * 0.1 / q)
        expected = rho1 / (1 - rho1) + rho2 / (1 - rho2)
        assert moment_series_tail(model, 1.0, 1.9, 2.1, q) == pytest.approx(expected)

    def test_bounded_below_gamma_mixing_is_finite(self):
        model = BoundedBelowArrivals(a=0.1, mixing=MixingLaw(kind="gamma", shape=2.0, scale=0.5))
        assert math.isfinite(moment_series_tail(model, 1.0, 1.9, 2.1, 2.1))

    @pytest.mark.parametrize("model", [
        PoissonArrivals(rate=1.0),
        RenewalArrivals(gap=InterArrivalLaw(kind="gamma", shape=2.0, scale=0.5)),
        BoundedBelowArrivals(a=0.2),
    ])
    def test_closed_form_matches_direct_sum(self, model):
        closed = moment_series_tail(model, 0.5, 1.5, 2.5, 2.5)
        direct = moment_series_direct(model, 0.5, 1.5, 2.5, 2.5, terms=20_000)
        assert closed == pytest.approx(direct, rel=1e-6)

    def test_remainder_decreases(self):
        model = PoissonArrivals(rate=1.0)
        tails = [moment_series_tail(model, 0.05, 1.9, 2.1, 2.1, start=m) for m in (0, 10, 100)]
        assert tails[0] > tails[1] > tails[2]

    def test_needs_positive_interest(self):
        with pytest.raises(DivergenceError, match="r > 0"):
            moment_series_tail(PoissonArrivals(), 0.0, 1.9, 2.1, 2.1)


class TestMomentCondition:
    """The infinite-horizon window 0 < q1 < J- <= J+ < q2."""

    def test_holds_inside_window(self, pareto_polar):
        report = check_moment_condition(pareto_polar, PoissonArrivals(), 0.5, 1.9, 2.1)
        assert report.holds
        assert report.q == 2.1
        assert math.isfinite(report.series_bound)

    def test_window_above_index(self, pareto_polar):
        report = check_moment_condition(pareto_polar, PoissonArrivals(), 0.5, 3.0, 5.0)
        assert not report.holds
        assert any("q1 < J-" in problem and "q1 = 3.0" in problem for problem in report.problems)

    def test_zero_interest(self, pareto_polar):
        report = check_moment_condition(pareto_polar, PoissonArrivals(), 0.0, 1.9, 2.1)
        assert not report.holds
        assert "r > 0" in report.summary()

    def test_index_below_one_uses_unit_exponent(self):
        claims = ClaimModel(
            radial=RadialLaw(kind="pareto", alpha=0.5),
            spectral=SpectralMeasure(atoms=[[1.0]], weights=[1.0]),
        )
        report = check_moment_condition(claims, PoissonArrivals(), 1.0, 0.4, 0.6)
        assert report.holds
        assert report.q == 1.0

    def test_rapidly_varying_claims_fail_window(self):
        claims = ClaimModel(
            radial=RadialLaw(kind="weibull", shape=0.5),
            spectral=SpectralMeasure(atoms=[[1.0]], weights=[1.0]),
        )
        report = check_moment_condition(claims, PoissonArrivals(), 1.0, 1.0, 2.0)
        assert not report.holds


class TestTruncation:
    """Smallest arrival count meeting a remainder tolerance."""

    def test_count_is_minimal(self, pareto_polar):
        model = PoissonArrivals(rate=1.0)
        tolerance = 1e-4
        count = truncation_count(pareto_polar, model, 0.5, 1.9, 2.1, tolerance)
        assert moment_series_tail(model, 0.5, 1.9, 2.1, 2.1, start=count) <= tolerance
        assert moment_series_tail(model, 0.5, 1.9, 2.1, 2.1, start=count - 1) > tolerance

    def test_gives_up_past_the_limit(self, pareto_polar):
        with pytest.raises(DivergenceError, match="remainder stays above"):
            truncation_count(pareto_polar, PoissonArrivals(), 1e-4, 1.9, 2.1, 1e-12, max_count=100)


class TestWLODWindow:
    """delta window of the WLOD construction."""

    def test_window_is_reported(self):
        model = WLODArrivals(gap=InterArrivalLaw(kind="exponential", rate=1.0))
        window = check_wlod_window(model, 0.5, 2.0)
        assert window['window_nonempty']
        assert window['delta_upper'] == pytest.approx(math.log(2.0))
        assert window['lag_correlation'] == pytest.approx(-0.4)

    def test_zero_interest_closes_window(self):
        window = check_wlod_window(WLODArrivals(), 0.0, 2.0)
        assert not window['window_nonempty']
