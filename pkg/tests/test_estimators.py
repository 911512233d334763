"""Tests for the Monte Carlo estimators and their reports."""

import math

import numpy as np
import pytest

from arrivals.models import PoissonArrivals
from asymptotics.rhs import AsymptoticValue
from claims.claim_model import ClaimModel, Dependence
from claims.radial import RadialLaw
from claims.spectral import SpectralMeasure
from core.errors import EstimatorPreconditionError
from estimators.intervals import proportion_interval, ratio_interval, wilson_interval
from estimators.monte_carlo import (
    conditional_mc,
    conditional_values,
    crude_mc,
    decomposition_diag,
    ruin_mc,
)
from estimators.reports import REPORT_COLUMNS, EstimateReport, proportion_report
from estimators.single_jump import weight_grid, weighted_sum_ratio
from simulation.risk_config import make_risk_config


# tail of the orthant set at this scale is exactly 0.1
SCALE_P10 = math.sqrt(10.0)


class TestIntervals:
    """Proportion and ratio intervals."""

    def test_wilson_stays_in_unit_interval(self):
        lower, upper = wilson_interval(0, 1000)
        assert lower == pytest.approx(0.0, abs=1e-12)
        assert 0 < upper < 0.01

    def test_wilson_below_hit_threshold(self):
        _, method = proportion_interval(5, 10_000)
        assert method == "wilson"
        _, method = proportion_interval(500, 10_000)
        assert method == "normal"

    def test_ratio_interval_contains_ratio(self):
        ratio, lower, upper = ratio_interval(0.02, 0.001, 0.01, 0.0001)
        assert ratio == pytest.approx(2.0)
        assert lower < 2.0 < upper

    def test_ratio_needs_positive_asymptotic(self):
        with pytest.raises(ValueError, match="positive"):
            ratio_interval(0.1, 0.01, 0.0)

    def test_wilson_rejects_bad_counts(self):
        with pytest.raises(ValueError, match="hits"):
            wilson_interval(11, 10)


class TestReports:
    """EstimateReport rows and flags."""

    def test_rare_hits_are_flagged(self):
        report = proportion_report("crude", 10.0, 3, 10_000, 1)
        assert report.ci_method == "wilson"
        assert any("only 3 hits" in flag for flag in report.flags)

    def test_row_has_fixed_columns(self):
        report = proportion_report("crude", 10.0, 300, 10_000, 1)
        report.match(AsymptoticValue(value=0.03, method="exact-closed-form"))
        row = report.to_row()
        assert list(row) == REPORT_COLUMNS
        assert row['ratio'] == pytest.approx(1.0)

    def test_without_asymptotic_ratio_is_nan(self):
        report = EstimateReport(estimator="crude", x=1.0, estimate=0.5, stderr=0.01, n_paths=1000, seed=1)
        report.match(None)
        assert math.isnan(report.to_row()['ratio'])


class TestCrudeMC:
    """Empirical frequency of D in xA."""

    def test_one_jump_model(self, pareto_polar, orthant_set, deterministic_arrivals):
        report = crude_mc(pareto_polar, deterministic_arrivals(times=(0.0,)), orthant_set, 0.05, 1.0,
                          SCALE_P10, n_paths=100_000, seed=1, match=False)
        assert abs(report.estimate - 0.1) < 4.0 * report.stderr

    def test_saturated_event(self, pareto_polar, orthant_set, deterministic_arrivals):
        report = crude_mc(pareto_polar, deterministic_arrivals(times=(0.0,)), orthant_set, 0.05, 1.0, 0.5,
                          n_paths=2000, seed=1, match=False)
        assert report.estimate == 1.0

    def test_matches_asymptotic_value(self, pareto_polar, orthant_set):
        report = crude_mc(pareto_polar, PoissonArrivals(rate=1.0), orthant_set, 0.05, 10.0, 20.0,
                          n_paths=20_000, seed=3)
        assert report.asymptotic is not None
        assert report.asymptotic.method == "exact-closed-form"
        assert report.ratio == pytest.approx(report.estimate / report.asymptotic.value)

    def test_same_seed_same_report(self, pareto_polar, sum_set):
        arrivals = PoissonArrivals(rate=1.0)
        first = crude_mc(pareto_polar, arrivals, sum_set, 0.05, 10.0, 10.0, n_paths=30_000, seed=9)
        second = crude_mc(pareto_polar, arrivals, sum_set, 0.05, 10.0, 10.0, n_paths=30_000, seed=9)
        assert first.to_row() == second.to_row()

    def test_infinite_horizon_needs_count(self, pareto_polar, sum_set):
        with pytest.raises(ValueError, match="truncation count"):
            crude_mc(pareto_polar, PoissonArrivals(), sum_set, 0.05, math.inf, 10.0, n_paths=1000, seed=1)

    def test_minimum_paths(self, pareto_polar, sum_set):
        with pytest.raises(ValueError, match="at least"):
            crude_mc(pareto_polar, PoissonArrivals(), sum_set, 0.05, 10.0, 10.0, n_paths=10, seed=1)

    def test_unsupported_asymptotic_leaves_ratio_empty(self, pareto_polar, sum_set):
        # without discounting the infinite-horizon integral diverges
        report = crude_mc(pareto_polar, PoissonArrivals(rate=1.0), sum_set, 0.0, math.inf, 10.0, n_paths=1000,
                          seed=1, count=20)
        assert report.asymptotic is None
        assert math.isnan(report.to_row()['ratio'])

    def test_programming_errors_propagate(self, pareto_polar, sum_set, monkeypatch):
        def broken(*args, **kwargs):
            raise TypeError("unexpected argument")

        monkeypatch.setattr("estimators.monte_carlo.finite_rhs", broken)
        with pytest.raises(TypeError, match="unexpected argument"):
            crude_mc(pareto_polar, PoissonArrivals(rate=1.0), sum_set, 0.05, 10.0, 10.0, n_paths=1000, seed=1)

    @pytest.mark.slow
    def test_worker_count_is_reproducible(self, pareto_polar, sum_set):
        arrivals = PoissonArrivals(rate=1.0)
        first = crude_mc(pareto_polar, arrivals, sum_set, 0.05, 10.0, 10.0, n_paths=50_000, seed=9, workers=2)
        second = crude_mc(pareto_polar, arrivals, sum_set, 0.05, 10.0, 10.0, n_paths=50_000, seed=9, workers=2)
        assert first.to_row() == second.to_row()


class TestConditionalMC:
    """Conditional Monte Carlo given the arrival times."""

    def test_two_arrivals_binomial_identity(self, pareto_polar, orthant_set, deterministic_arrivals):
        report = conditional_mc(pareto_polar, deterministic_arrivals(times=(0.0, 0.0)), orthant_set, 0.05, 1.0,
                                SCALE_P10, n_paths=1000, seed=1, match=False)
        assert report.estimate == pytest.approx(2 * 0.1 - 0.1 ** 2, rel=1e-12)
        assert report.stderr == pytest.approx(0.0, abs=1e-9)

    def test_no_arrivals_contribute_zero(self, pareto_polar, orthant_set):
        values = conditional_values(pareto_polar, orthant_set, 0.05, 10.0, np.full((3, 2), np.inf))
        np.testing.assert_array_equal(values, [0.0, 0.0, 0.0])

    def test_agrees_with_crude(self, pareto_polar, sum_set):
        arrivals = PoissonArrivals(rate=1.0)
        crude = crude_mc(pareto_polar, arrivals, sum_set, 0.05, 10.0, 5.0, n_paths=100_000, seed=4, match=False)
        conditional = conditional_mc(pareto_polar, arrivals, sum_set, 0.05, 10.0, 5.0, n_paths=100_000, seed=5,
                                     match=False)
        # one big jump dominates at this scale; the crude estimate also counts sums of moderate claims
        assert conditional.estimate <= crude.estimate + 4 * crude.stderr
        assert conditional.stderr < crude.stderr

    def test_rejects_dependent_claims(self, sum_set):
        claims = ClaimModel(
            radial=RadialLaw(kind="pareto", alpha=2.0),
            spectral=SpectralMeasure(atoms=[[1.0, 0.0], [0.0, 1.0]], weights=[0.5, 0.5]),
            dependence=Dependence(kind="ar1", rho=0.99),
        )
        with pytest.raises(EstimatorPreconditionError, match="independent claims"):
            conditional_mc(claims, PoissonArrivals(), sum_set, 0.05, 10.0, 10.0, n_paths=1000, seed=1)


class TestDecomposition:
    """Big-jump decomposition of the entrance event."""

    def test_two_arrivals_binomial(self, pareto_polar, orthant_set, deterministic_arrivals):
        report = decomposition_diag(pareto_polar, deterministic_arrivals(times=(0.0, 0.0)), orthant_set, 0.05,
                                    1.0, SCALE_P10, n_paths=200_000, seed=2, match=False)
        assert abs(report.jump_at_least_two.value - 0.01) < 4 * report.jump_at_least_two.stderr
        assert abs(report.lambda_x.value - 0.2) < 4 * report.lambda_x.stderr
        assert report.sandwich_holds()
        assert report.markov_chain_holds()

    def test_relative_terms_need_asymptotic(self, pareto_polar, orthant_set, deterministic_arrivals):
        report = decomposition_diag(pareto_polar, deterministic_arrivals(times=(0.0, 0.0)), orthant_set, 0.05,
                                    1.0, SCALE_P10, n_paths=10_000, seed=2, match=False)
        with pytest.raises(ValueError, match="asymptotic"):
            report.relative_to_lambda()

    def test_rows(self, pareto_polar, sum_set):
        report = decomposition_diag(pareto_polar, PoissonArrivals(rate=1.0), sum_set, 0.05, 10.0, 10.0,
                                    n_paths=20_000, seed=3)
        rows = report.to_rows()
        assert [row['estimator'] for row in rows] == [
            'decomposition:jump_at_least_one', 'decomposition:jump_at_least_two', 'decomposition:single_jump',
            'decomposition:entrance', 'decomposition:entrance_without_jump', 'decomposition:lambda_x',
        ]
        assert all(list(row) == REPORT_COLUMNS for row in rows)
        assert report.sandwich_holds()
        relative = report.relative_to_lambda()
        assert set(relative) == {'multiple_jumps', 'no_jump_entrance'}


LARGE_SCALES = [10.0, 20.0, 50.0]


@pytest.mark.slow
class TestAsymptoticAgreement:
    """Estimates over the asymptotic value for Pareto(2) claims as x grows."""

    @pytest.mark.parametrize("x", LARGE_SCALES)
    def test_crude_ratio_finite_horizon(self, pareto_polar, orthant_set, x):
        # light load keeps the second-order drift of the other claims small
        report = crude_mc(pareto_polar, PoissonArrivals(rate=0.03), orthant_set, 0.05, 10.0, x,
                          n_paths=8_000_000, seed=11)
        assert report.asymptotic.method == "exact-closed-form"
        assert 0.85 <= report.ratio <= 1.15

    @pytest.mark.parametrize("x", LARGE_SCALES)
    def test_conditional_ratio_finite_horizon(self, pareto_polar, sum_set, x):
        report = conditional_mc(pareto_polar, PoissonArrivals(rate=1.0), sum_set, 0.05, 10.0, x,
                                n_paths=100_000, seed=12)
        lam = report.asymptotic.value
        # J is Poisson(Lambda_x) for Poisson arrivals and iid claims
        assert abs(report.estimate + math.expm1(-lam)) < 4.0 * report.stderr + 1e-12
        assert 0.85 <= report.ratio <= 1.15

    @pytest.mark.parametrize("x", LARGE_SCALES)
    def test_conditional_ratio_infinite_horizon(self, pareto_polar, orthant_set, x):
        report = conditional_mc(pareto_polar, PoissonArrivals(rate=1.0), orthant_set, 0.05, math.inf, x,
                                n_paths=50_000, seed=14, count=200)
        lam = report.asymptotic.value
        assert lam == pytest.approx(10.0 / x ** 2)
        assert abs(report.estimate + math.expm1(-lam)) < 4.0 * report.stderr + 1e-12
        assert 0.85 <= report.ratio <= 1.15

    @pytest.mark.parametrize("x", LARGE_SCALES)
    def test_decomposition_remainders_are_small(self, pareto_polar, orthant_set, x):
        report = decomposition_diag(pareto_polar, PoissonArrivals(rate=0.03), orthant_set, 0.05, 10.0, x,
                                    n_paths=8_000_000, seed=13)
        relative = report.relative_to_lambda()
        assert relative['multiple_jumps'].value < 0.1
        assert relative['no_jump_entrance'].value < 0.1
        assert report.sandwich_holds()
        assert report.markov_chain_holds()


class TestRuinMC:
    """Ruin frequency of the perturbed surplus."""

    def test_unperturbed_ruin_equals_crude_on_mapped_set(self, pareto_polar):
        config = make_risk_config(0.0, 5.0, [0.5, 0.5], "L1")
        arrivals = PoissonArrivals(rate=1.0)
        ruin = ruin_mc(config, pareto_polar, arrivals, 10.0, n_paths=20_000, seed=7, match=False)
        crude = crude_mc(pareto_polar, arrivals, config.rare_set(), 0.0, 5.0, 10.0, n_paths=20_000, seed=7,
                         match=False)
        assert ruin.hits == crude.hits

    def test_refinement_shift_is_reported(self, pareto_polar):
        config = make_risk_config(0.05, 2.0, [0.5, 0.5], "L2", diffusion=[1.0, 1.0],
                                  correlation=[[1, 0.5], [0.5, 1]], grid_step=0.1)
        report = ruin_mc(config, pareto_polar, PoissonArrivals(rate=1.0), 3.0, n_paths=2000, seed=8)
        shift = report.extra['refinement_shift']
        assert report.extra['refined_estimate'] >= report.estimate
        assert shift == pytest.approx(report.extra['refined_estimate'] - report.estimate)
        assert report.extra['refinement_shift_stderr'] >= 0
        assert report.asymptotic is not None

    def test_no_refinement_without_diffusion(self, pareto_polar):
        config = make_risk_config(0.05, 2.0, [0.5, 0.5], "L2")
        report = ruin_mc(config, pareto_polar, PoissonArrivals(rate=1.0), 3.0, n_paths=2000, seed=8, match=False)
        assert 'refinement_shift' not in report.extra

    @pytest.mark.slow
    def test_halving_the_grid_stays_within_one_stderr(self, pareto_polar):
        config = make_risk_config(0.05, 10.0, [0.5, 0.5], "L2", diffusion=[0.5, 0.5],
                                  correlation=[[1, 0.5], [0.5, 1]], grid_step=0.05)
        report = ruin_mc(config, pareto_polar, PoissonArrivals(rate=1.0), 20.0, n_paths=20_000, seed=17)
        assert abs(report.extra['refinement_shift']) <= report.stderr
        assert not any("grid bias" in flag for flag in report.flags)

    @pytest.mark.slow
    def test_perturbation_leaves_large_capital_ruin_unchanged(self, pareto_polar):
        arrivals = PoissonArrivals(rate=1.0)
        perturbed = make_risk_config(0.05, 10.0, [0.5, 0.5], "L2", premiums=[{'kind': 'constant', 'M': 0.1}] * 2,
                                     diffusion=[0.2, 0.2], correlation=[[1, 0.5], [0.5, 1]], grid_step=0.05)
        plain = make_risk_config(0.05, 10.0, [0.5, 0.5], "L2")

        with_perturbation = ruin_mc(perturbed, pareto_polar, arrivals, 100.0, n_paths=400_000, seed=19, refine=False)
        without = ruin_mc(plain, pareto_polar, arrivals, 100.0, n_paths=400_000, seed=19)
        combined = math.hypot(with_perturbation.stderr, without.stderr)
        assert abs(with_perturbation.estimate - without.estimate) < 4.0 * combined
        assert with_perturbation.asymptotic.value == pytest.approx(without.asymptotic.value)


class TestSingleJump:
    """Weighted sums of a short claim sequence against the sum of single tails."""

    def test_weight_grid(self):
        grid = weight_grid(2, 0.5, 1.0, 3)
        assert len(grid) == 9
        assert grid[0] == [0.5, 0.5] and grid[-1] == [1.0, 1.0]

    def test_weight_grid_rejects_zero(self):
        with pytest.raises(ValueError, match="0 < a <= b"):
            weight_grid(2, 0.0, 1.0, 3)

    def test_oracle_ratio_decreases_towards_one(self, pareto_polar, sum_set):
        table = weighted_sum_ratio(pareto_polar, [[1.0, 1.0]], sum_set, [5.0, 10.0, 30.0], n_paths=20_000,
                                   seed=1)
        oracle = [row.oracle_ratio for row in table.rows]
        assert oracle[0] > oracle[1] > oracle[2]
        assert oracle[2] == pytest.approx(1.0, abs=0.3)

    def test_simulated_ratio_matches_oracle(self, pareto_polar, sum_set):
        table = weighted_sum_ratio(pareto_polar, [[1.0, 0.5]], sum_set, [10.0], n_paths=200_000, seed=2)
        row = table.rows[0]
        assert row.single_sum == pytest.approx(pareto_polar.tail(sum_set, 10.0) + pareto_polar.tail(sum_set, 20.0))
        assert abs(row.ratio - row.oracle_ratio) < 4 * row.stderr

    def test_strongly_dependent_claims_break_the_ratio(self, sum_set):
        claims = ClaimModel(
            radial=RadialLaw(kind="pareto", alpha=2.0),
            spectral=SpectralMeasure(atoms=[[1.0, 0.0], [0.0, 1.0]], weights=[0.5, 0.5]),
            dependence=Dependence(kind="ar1", rho=0.99),
        )
        table = weighted_sum_ratio(claims, [[1.0, 1.0]], sum_set, [5.0], n_paths=100_000, seed=3)
        row = table.rows[0]
        assert row.oracle_ratio is None
        assert row.ratio > 1.5

    def test_rows_and_deviation(self, pareto_polar, sum_set):
        table = weighted_sum_ratio(pareto_polar, weight_grid(2, 0.5, 1.0, 2), sum_set, [5.0, 10.0],
                                   n_paths=20_000, seed=4, with_oracle=False)
        assert len(table.rows) == 8
        assert set(table.max_deviation()) == {5.0, 10.0}
        assert all(math.isnan(row['oracle_ratio']) for row in table.to_rows())

    def test_rejects_long_sequences(self, pareto_polar, sum_set):
        with pytest.raises(ValueError, match="2- or 3-vectors"):
            weighted_sum_ratio(pareto_polar, [[1.0, 1.0, 1.0, 1.0]], sum_set, [5.0], n_paths=1000, seed=1)
