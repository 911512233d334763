"""
Experiment Pipeline

validate -> asymptotic values -> truncation count -> estimators -> artifacts.

Every estimator at every scale reuses the master seed, so the estimates along
the x-grid share their random numbers and ratio curves are smooth in x.
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional
import logging
import math
import time

from arrivals.diagnostics import moment_exponent, moment_series_tail, truncation_count
from asymptotics.rhs import AsymptoticValue, finite_rhs, infinite_rhs, write_asymptotic_csv
from core import __version__
from core.errors import RuinsimError
from core.settings import get_settings, resolve_seed
from core.streams import SEED_SCHEME
from estimators.monte_carlo import conditional_mc, crude_mc, decomposition_diag, ruin_mc
from estimators.reports import EstimateReport
from estimators.single_jump import WeightedSumTable, weighted_sum_ratio
from .checks import ValidationReport, validate_experiment
from .experiment import ExperimentConfig, RuinTarget
from .reporting import summary_text, write_meta, write_report_csv, write_single_jump_csv, write_summary

logger = logging.getLogger(__name__)

Progress = Optional[Callable[[str], None]]


@dataclass
class RunResult:
    """
    Outcome of one experiment run.

    Attributes:
        name: Experiment name
        seed: Seed actually used (after the RUINSIM_SEED override)
        rows: Report rows in REPORT_COLUMNS layout
        asymptotic_rows: (x, asymptotic, method, error_bound) rows
        flags: Warnings collected from every estimator
        validation: Assembly-check findings
        truncation_count: Arrival count M used for an infinite horizon
        remainder_bound: Certified series remainder at M
        single_jump: Weighted-sum table when requested
        paths: Written artifacts by name
        meta: Contents of meta.json
    """

    name: str
    seed: int
    rows: List[Dict] = field(default_factory=list)
    asymptotic_rows: List[Dict] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)
    validation: Optional[ValidationReport] = None
    truncation_count: Optional[int] = None
    remainder_bound: Optional[float] = None
    single_jump: Optional[WeightedSumTable] = None
    paths: Dict[str, Path] = field(default_factory=dict)
    meta: Dict = field(default_factory=dict)


def _step(progress: Progress, message: str):
    logger.info(message)
    if progress is not None:
        progress(message)


def compute_asymptotics(config: ExperimentConfig, seed: int) -> Dict[float, AsymptoticValue]:
    """
    Asymptotic value at every x of the grid.

    Raises:
        RuinsimError: the value cannot be evaluated (divergence, failed assumption)
    """
    rare_set = config.rare_set
    values = {}
    for x in config.x_grid:
        if config.is_infinite:
            window = config.truncation
            count = window.count if window is not None else None
            values[x] = infinite_rhs(config.claims, config.arrivals, rare_set, config.r, x,
                                     q1=window.q1, q2=window.q2, count=count, seed=seed)
        else:
            values[x] = finite_rhs(config.claims, config.arrivals, rare_set, config.r, config.T, x, seed=seed)
    return values


def choose_truncation(config: ExperimentConfig, asymptotics: Dict[float, AsymptoticValue]) -> Dict:
    """
    Arrival count M for an infinite horizon and its certified remainder.

    An explicit truncation.count wins; otherwise M is the smallest count whose
    remainder is below truncation.remainder_fraction times the smallest
    positive asymptotic value on the grid.
    """
    window = config.truncation
    q = moment_exponent(config.claims.matuszewska_bounds()[1], window.q2)
    fraction = float(get_settings()['truncation']['remainder_fraction'])

    positive = [value.value for value in asymptotics.values() if value.value > 0]
    tolerance = fraction * min(positive) if positive else None

    if window.count is not None:
        count = int(window.count)
    elif tolerance is not None:
        count = truncation_count(config.claims, config.arrivals, config.r, window.q1, window.q2, tolerance)
    else:
        count = int(get_settings()['truncation']['default_count'])

    remainder = moment_series_tail(config.arrivals, config.r, window.q1, window.q2, q, start=count)
    return {'count': count, 'remainder_bound': remainder, 'tolerance': tolerance, 'q': q}


def _relabel(report: EstimateReport, estimator: str) -> EstimateReport:
    report.estimator = estimator
    return report


def _single_jump_rows(table: WeightedSumTable) -> List[Dict]:
    """One report row per x: the weight vector with the largest |ratio - 1|"""
    z = float(get_settings()['estimators']['z'])
    worst: Dict[float, object] = {}
    for row in table.rows:
        if not math.isfinite(row.ratio):
            continue
        current = worst.get(row.x)
        if current is None or abs(row.ratio - 1.0) > abs(current.ratio - 1.0):
            worst[row.x] = row

    rows = []
    for x in sorted(worst):
        row = worst[x]
        rows.append({
            'x': x,
            'estimator': "single-jump",
            'estimate': row.ratio * row.single_sum,
            'stderr': row.stderr * row.single_sum,
            'asymptotic': row.single_sum,
            'ratio': row.ratio,
            'ratio_ci_lo': row.ratio - z * row.stderr,
            'ratio_ci_hi': row.ratio + z * row.stderr,
            'n_paths': table.n_paths,
            'seed': table.seed,
        })
    return rows


def _run_estimators(config: ExperimentConfig, result: RunResult, asymptotics: Dict[float, AsymptoticValue],
                    workers: int, progress: Progress) -> Dict[str, float]:
    timing: Dict[str, float] = {}
    seed = result.seed
    count = result.truncation_count
    rare_set = config.rare_set
    refine = bool(config.checks.get('refinement', True))
    common = dict(n_paths=config.n_paths, seed=seed, workers=workers, match=False)

    for estimator in config.estimators:
        started = time.perf_counter()
        if estimator == "single-jump":
            _step(progress, "single-jump: weighted sums over the weight grid")
            table = weighted_sum_ratio(config.claims, config.single_jump.weights(), rare_set, config.x_grid,
                                       config.n_paths, seed, workers=workers)
            result.single_jump = table
            result.rows.extend(_single_jump_rows(table))
            result.flags.extend(f"single-jump: {flag}" for flag in table.flags)
            timing[estimator] = time.perf_counter() - started
            continue

        for x in config.x_grid:
            _step(progress, f"{estimator} at x = {x:g}")
            asymptotic = asymptotics.get(x)
            if estimator == "crude":
                report = crude_mc(config.claims, config.arrivals, rare_set, config.r, config.T, x,
                                  count=count, asymptotic=asymptotic, **common)
            elif estimator == "conditional":
                report = conditional_mc(config.claims, config.arrivals, rare_set, config.r, config.T, x,
                                        count=count, asymptotic=asymptotic, **common)
            elif estimator == "decomposition":
                decomposition = decomposition_diag(config.claims, config.arrivals, rare_set, config.r, config.T,
                                                   x, count=count, asymptotic=asymptotic, **common)
                result.rows.extend(decomposition.to_rows())
                result.flags.extend(f"decomposition (x={x:g}): {flag}" for flag in decomposition.flags)
                if not decomposition.sandwich_holds():
                    result.flags.append(f"decomposition (x={x:g}): sandwich inequality violated on hit counts")
                continue
            else:
                target: RuinTarget = config.target
                unperturbed = estimator == "ruin-unperturbed"
                risk = target.risk_config(config.r, config.T, truncation=count, unperturbed=unperturbed)
                report = _relabel(ruin_mc(risk, config.claims, config.arrivals, x, refine=refine,
                                          asymptotic=asymptotic, **common), estimator)

            if config.is_infinite:
                report.remainder_bound = result.remainder_bound
                fraction = float(get_settings()['truncation']['remainder_fraction'])
                if report.estimate > 0 and result.remainder_bound > fraction * report.estimate:
                    report.flag(f"truncation remainder {result.remainder_bound:.3g} exceeds "
                                f"{fraction:g} of the estimate")
            result.rows.append(report.to_row())
            result.flags.extend(f"{report.estimator} (x={x:g}): {flag}" for flag in report.flags)
        timing[estimator] = time.perf_counter() - started
    return timing


def run_experiment(config: ExperimentConfig, out_dir: Path, workers: Optional[int] = None,
                   progress: Progress = None) -> RunResult:
    """
    Validate, estimate and write every artifact of an experiment.

    Args:
        config: Parsed experiment
        out_dir: Output directory
        workers: Worker processes (defaults to config.workers)
        progress: Callback receiving step descriptions

    Returns:
        RunResult

    Raises:
        AssumptionError: an assembly check failed
        EstimatorPreconditionError: a requested estimator cannot run on the model
    """
    started_at = datetime.now(timezone.utc)
    clock = time.perf_counter()
    seed = resolve_seed(config.seed)
    workers = int(workers or config.workers)
    result = RunResult(name=config.name, seed=seed)

    _step(progress, "assembly checks")
    validation = validate_experiment(config)
    validation.raise_for_problems()
    result.validation = validation

    _step(progress, "asymptotic values")
    try:
        asymptotics = compute_asymptotics(config, seed)
    except RuinsimError as e:
        logger.warning("Asymptotic values unavailable: %s", e)
        result.flags.append(f"asymptotic values unavailable: {e}")
        asymptotics = {}
    for x, value in asymptotics.items():
        result.asymptotic_rows.append(value.to_row(x))
        result.flags.extend(f"asymptotic (x={x:g}): {note}" for note in value.notes)

    truncation = None
    if config.is_infinite:
        _step(progress, "truncation count")
        truncation = choose_truncation(config, asymptotics)
        result.truncation_count = truncation['count']
        result.remainder_bound = truncation['remainder_bound']

    timing = _run_estimators(config, result, asymptotics, workers, progress)

    settings = get_settings()
    out_dir = Path(out_dir)
    files = settings['output']
    result.paths['report'] = write_report_csv(result.rows, out_dir / files['report_file'])
    if result.asymptotic_rows:
        result.paths['asymptotic'] = write_asymptotic_csv(result.asymptotic_rows, out_dir / files['asymptotic_file'])
    if result.single_jump is not None:
        result.paths['single_jump'] = write_single_jump_csv(result.single_jump.to_rows(), out_dir / "single_jump.csv")
    summary = summary_text(config.name, result.rows, result.flags, notes=validation.notes)
    result.paths['summary'] = write_summary(summary, out_dir / files['summary_file'])

    result.meta = {
        'name': config.name,
        'version': __version__,
        'seed': seed,
        'config_seed': config.seed,
        'seed_scheme': SEED_SCHEME,
        'workers': workers,
        'batch_size': int(settings['simulation']['batch_size']),
        'surplus_batch_size': int(settings['simulation']['surplus_batch_size']),
        'truncation': truncation,
        'validation': validation.to_dict(),
        'flags': result.flags,
        'timing': {
            'started_at': started_at.isoformat(),
            'total_seconds': time.perf_counter() - clock,
            'estimators': timing,
        },
        'config': config.to_dict(),
    }
    result.paths['meta'] = write_meta(result.meta, out_dir / files['meta_file'])
    return result


def run_asymptotic(config: ExperimentConfig, out_dir: Optional[Path] = None) -> List[Dict]:
    """
    Asymptotic values only, no simulation.

    Raises:
        AssumptionError: a model assumption fails
        DivergenceError: an infinite-horizon value cannot be certified
    """
    validation = validate_experiment(config)
    if validation.problems:
        validation.raise_for_problems()
    seed = resolve_seed(config.seed)
    rows = [value.to_row(x) for x, value in compute_asymptotics(config, seed).items()]
    if out_dir is not None:
        write_asymptotic_csv(rows, Path(out_dir) / get_settings()['output']['asymptotic_file'])
    return rows
