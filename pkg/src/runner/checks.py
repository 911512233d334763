"""
Assembly Checks

Model-assumption checks run on a parsed experiment before any estimate:
the moment window and summability of the discounted series for an infinite
horizon, estimator preconditions, the WLOD delta window and, on request, an
empirical look at the second factorial moment measure.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional
import logging
import math

from arrivals.diagnostics import (
    FactorialMomentReport,
    MomentConditionReport,
    check_factorial_moment_bound,
    check_moment_condition,
    check_wlod_window,
)
from arrivals.models import WLODArrivals
from core.errors import AssumptionError, EstimatorPreconditionError
from core.streams import check_rng
from .experiment import ExperimentConfig

logger = logging.getLogger(__name__)

POISSON_KINDS = ("poisson", "inhom-poisson")


@dataclass
class ValidationReport:
    """
    Findings of the assembly checks.

    Attributes:
        name: Experiment name
        problems: Violated model assumptions, with the numbers involved
        estimator_problems: Requested estimators that cannot run on this model
        notes: Informational findings
        moment: Moment-condition report (infinite horizon)
        factorial: Factorial-moment report (when requested)
        wlod: WLOD delta window (WLOD arrivals)
    """

    name: str
    problems: List[str] = field(default_factory=list)
    estimator_problems: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    moment: Optional[MomentConditionReport] = None
    factorial: Optional[FactorialMomentReport] = None
    wlod: Optional[Dict] = None

    @property
    def ok(self) -> bool:
        return not self.problems and not self.estimator_problems

    def raise_for_problems(self):
        if self.estimator_problems:
            raise EstimatorPreconditionError("; ".join(self.estimator_problems))
        if self.problems:
            raise AssumptionError("; ".join(self.problems))

    def to_dict(self) -> Dict:
        data: Dict = {
            'ok': self.ok,
            'problems': self.problems + self.estimator_problems,
            'notes': self.notes,
        }
        if self.moment is not None:
            data['moment'] = {
                'holds': self.moment.holds,
                'q': self.moment.q,
                'series_bound': self.moment.series_bound,
                'j_minus': self.moment.j_minus,
                'j_plus': self.moment.j_plus,
            }
        if self.factorial is not None:
            data['factorial_moment'] = {
                'c_hat': self.factorial.c_hat,
                'ci': list(self.factorial.ci),
                'pooled_ratio': self.factorial.pooled_ratio,
                'pooled_stderr': self.factorial.pooled_stderr,
                'paths': self.factorial.paths,
                'unreliable_cells': self.factorial.unreliable_cells,
                'trivially_holds': self.factorial.trivially_holds,
            }
        if self.wlod is not None:
            data['wlod'] = self.wlod
        return data


def _moment_checks(config: ExperimentConfig, report: ValidationReport):
    window = config.truncation
    moment = check_moment_condition(config.claims, config.arrivals, config.r, window.q1, window.q2)
    report.moment = moment
    if moment.holds:
        report.notes.append(f"moment condition holds: {moment.summary()}")
    else:
        report.problems.extend(f"moment condition: {problem}" for problem in moment.problems)


def _factorial_check(config: ExperimentConfig, report: ValidationReport):
    section = config.checks['factorial_moment']
    horizon = section.get('horizon', config.T)
    if math.isinf(horizon):
        report.problems.append("checks.factorial_moment.horizon: required when T is inf")
        return

    factorial = check_factorial_moment_bound(config.arrivals, horizon, section['step'], section['paths'],
                                             check_rng(config.seed))
    report.factorial = factorial
    if factorial.trivially_holds:
        report.notes.append("factorial moment bound holds trivially: no two arrivals in distinct cells")
    else:
        report.notes.append(
            f"factorial moment ratio C_hat = {factorial.c_hat:.4g} "
            f"(simultaneous CI {factorial.ci[0]:.4g} .. {factorial.ci[1]:.4g}, "
            f"pooled {factorial.pooled_ratio:.4g} +/- {factorial.pooled_stderr:.2g})"
        )
    if config.arrivals.kind in POISSON_KINDS:
        note = "C = 1 holds for Poisson arrivals"
        if not factorial.consistent_with(1.0):
            report.notes.append(f"{note}, but the sample rejects C <= 1; increase checks.factorial_moment.paths")
        else:
            report.notes.append(note)
    report.notes.extend(factorial.warnings)


def validate_experiment(config: ExperimentConfig) -> ValidationReport:
    """
    Run every assembly check on a parsed experiment.

    Args:
        config: Schema-valid experiment

    Returns:
        ValidationReport; nothing is raised for a failed check
    """
    report = ValidationReport(name=config.name)
    j_minus, j_plus = config.claims.matuszewska_bounds()
    report.notes.append(f"Matuszewska bounds of the claim tail: J- = {j_minus:g}, J+ = {j_plus:g}")

    if config.is_infinite:
        _moment_checks(config, report)

    if "conditional" in config.estimators and not config.claims.is_iid:
        dependence = config.claims.dependence
        report.estimator_problems.append(
            f"estimators: conditional needs independent claims (got {dependence.kind} with rho = {dependence.rho:g})"
        )

    if isinstance(config.arrivals, WLODArrivals) and config.is_infinite:
        window = check_wlod_window(config.arrivals, config.r, j_minus)
        report.wlod = window
        if window['window_nonempty']:
            report.notes.append(
                f"WLOD delta window (0, {window['delta_upper']:.4g}), g_L growth {window['g_L_growth']}"
            )
        else:
            report.problems.append(
                f"arrivals: WLOD delta window is empty (upper end {window['delta_upper']:.4g} <= 0)"
            )

    if 'factorial_moment' in config.checks:
        _factorial_check(config, report)

    for problem in report.problems + report.estimator_problems:
        logger.warning("%s: %s", config.name, problem)
    return report
