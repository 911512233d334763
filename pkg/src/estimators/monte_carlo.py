"""
Monte Carlo Estimators

crude_mc, conditional_mc, decomposition_diag and ruin_mc. Every estimator runs
a picklable batch kernel through core.streams.map_batches, so results depend
only on (seed, workers, batch size) and merge in a fixed order.
"""

from functools import partial
from typing import Dict, Optional
import logging
import math

import numpy as np

from arrivals.models import ArrivalModel
from asymptotics.rhs import AsymptoticValue, finite_rhs, infinite_rhs
from claims.claim_model import ClaimModel
from core.errors import AssumptionError, DivergenceError, EstimatorPreconditionError
from core.settings import get_settings
from core.streams import map_batches, reduce_sums
from geometry.rare_sets import RareSet, functional_XA
from simulation.discounted_claims import simulate_D_batch
from simulation.risk_config import RiskConfig
from simulation.surplus import simulate_surplus_batch
from .reports import DecompositionReport, EstimateReport, MCValue, mean_report, proportion_report

logger = logging.getLogger(__name__)


def _horizon_mode(horizon: float, count: Optional[int]) -> Dict:
    if math.isinf(horizon):
        if count is None:
            raise ValueError("an infinite horizon needs a truncation count")
        return {'count': int(count)}
    return {'horizon': float(horizon)}


def _check_paths(n_paths: int, minimum_key: str = 'min_paths'):
    minimum = int(get_settings()['estimators'][minimum_key])
    if n_paths < minimum:
        raise ValueError(f"need at least {minimum} paths, got {n_paths}")


def _batch_size(key: str = 'batch_size') -> int:
    return int(get_settings()['simulation'][key])


def _asymptotic(claims, arrivals, rare_set, r, horizon, x, seed) -> Optional[AsymptoticValue]:
    try:
        if math.isinf(horizon):
            return infinite_rhs(claims, arrivals, rare_set, r, x, seed=seed)
        return finite_rhs(claims, arrivals, rare_set, r, horizon, x, seed=seed)
    except (AssumptionError, DivergenceError, ValueError) as e:
        logger.warning("Could not evaluate the asymptotic value at x=%g: %s", x, e)
        return None


# Kernels

def _crude_kernel(claims, arrivals, rare_set, r, mode, x, rng, n) -> Dict:
    draw = simulate_D_batch(claims, arrivals, r, rng, n, **mode)
    hits = functional_XA(rare_set, draw.aggregate()) > x
    return {'hits': int(np.sum(hits))}


def _conditional_kernel(claims, arrivals, rare_set, r, mode, x, rng, n) -> Dict:
    batch = arrivals.sample(rng, n, **mode)
    values = conditional_values(claims, rare_set, r, x, batch.times)
    return {'total': float(values.sum()), 'total_sq': float(np.sum(values ** 2))}


def conditional_values(claims: ClaimModel, rare_set: RareSet, r: float, x: float, times: np.ndarray) -> np.ndarray:
    """
    Per-path 1 - prod_i (1 - P(X exp(-r tau_i) in xA)), the conditional probability
    of at least one big jump given the arrival times.

    Args:
        times: (n, k) arrival times, +inf padded

    Returns:
        (n,) values
    """
    if times.shape[1] == 0:
        return np.zeros(times.shape[0])
    mask = np.isfinite(times)
    safe = np.where(mask, times, 0.0)
    probabilities = np.where(mask, claims.tail(rare_set, x * np.exp(r * safe)), 0.0)
    with np.errstate(divide='ignore'):
        log_survival = np.sum(np.log1p(-probabilities), axis=1)
    return -np.expm1(log_survival)


def _decomposition_kernel(claims, arrivals, rare_set, r, mode, x, rng, n) -> Dict:
    draw = simulate_D_batch(claims, arrivals, r, rng, n, **mode)
    jumps = draw.jump_flags(rare_set, x).sum(axis=1)
    entered = functional_XA(rare_set, draw.aggregate()) > x
    return {
        'jump_at_least_one': int(np.sum(jumps >= 1)),
        'jump_at_least_two': int(np.sum(jumps >= 2)),
        'single_jump': int(np.sum(jumps == 1)),
        'entrance': int(np.sum(entered)),
        'entrance_without_jump': int(np.sum(entered & (jumps == 0))),
        'jump_total': int(np.sum(jumps)),
        'jump_total_sq': int(np.sum(jumps.astype(np.int64) ** 2)),
    }


def _ruin_kernel(config, claims, arrivals, x, refine, rng, n) -> Dict:
    batch = simulate_surplus_batch(config, claims, arrivals, x, rng, n, refine=refine)
    result = {'hits': int(np.sum(batch.ruined))}
    if refine:
        shift = batch.ruined_fine.astype(int) - batch.ruined.astype(int)
        result['fine_hits'] = int(np.sum(batch.ruined_fine))
        result['shift_sq'] = int(np.sum(shift ** 2))
    return result


# Estimators

def crude_mc(claims: ClaimModel, arrivals: ArrivalModel, rare_set: RareSet, r: float, T: float, x: float,
             n_paths: int, seed: int, workers: int = 1, count: Optional[int] = None,
             asymptotic: Optional[AsymptoticValue] = None, match: bool = True) -> EstimateReport:
    """
    Empirical frequency of D(T) in xA.

    Args:
        claims: Claim model
        arrivals: Arrival model
        rare_set: The set A
        r: Interest force
        T: Horizon (math.inf with a truncation count)
        x: Scale
        n_paths: Paths (>= estimators.min_paths)
        seed: Master seed
        workers: Worker processes
        count: Truncation count for an infinite horizon
        asymptotic: Precomputed matched value
        match: Compute the matched value when none is given

    Returns:
        EstimateReport
    """
    _check_paths(n_paths)
    mode = _horizon_mode(T, count)
    kernel = partial(_crude_kernel, claims, arrivals, rare_set, r, mode, x)
    totals = reduce_sums(map_batches(kernel, n_paths, seed, workers=workers, batch_size=_batch_size()))

    report = proportion_report("crude", x, int(totals['hits']), n_paths, seed)
    if asymptotic is None and match:
        asymptotic = _asymptotic(claims, arrivals, rare_set, r, T, x, seed)
    report.match(asymptotic)
    return report


def conditional_mc(claims: ClaimModel, arrivals: ArrivalModel, rare_set: RareSet, r: float, T: float, x: float,
                   n_paths: int, seed: int, workers: int = 1, count: Optional[int] = None,
                   asymptotic: Optional[AsymptoticValue] = None, match: bool = True) -> EstimateReport:
    """
    Conditional Monte Carlo for P(J_x >= 1) given the arrival times.

    Each path contributes 1 - prod_i (1 - P(X exp(-r tau_i) in xA)); only arrival
    times are simulated, the claim tail is exact.

    Raises:
        EstimatorPreconditionError: claims are not independent
    """
    if not claims.is_iid:
        raise EstimatorPreconditionError(
            f"conditional_mc needs independent claims, got {claims.dependence.kind} with rho={claims.dependence.rho}"
        )
    _check_paths(n_paths)
    mode = _horizon_mode(T, count)
    kernel = partial(_conditional_kernel, claims, arrivals, rare_set, r, mode, x)
    totals = reduce_sums(map_batches(kernel, n_paths, seed, workers=workers, batch_size=_batch_size()))

    report = mean_report("conditional", x, totals['total'], totals['total_sq'], n_paths, seed)
    if asymptotic is None and match:
        asymptotic = _asymptotic(claims, arrivals, rare_set, r, T, x, seed)
    report.match(asymptotic)
    return report


def decomposition_diag(claims: ClaimModel, arrivals: ArrivalModel, rare_set: RareSet, r: float, T: float, x: float,
                       n_paths: int, seed: int, workers: int = 1, count: Optional[int] = None,
                       asymptotic: Optional[AsymptoticValue] = None, match: bool = True) -> DecompositionReport:
    """
    Estimate P(J >= 1), P(J >= 2), P(J = 1), P(D in xA), P(D in xA, J = 0) and E[J]
    on the same paths.

    Returns:
        DecompositionReport
    """
    _check_paths(n_paths, 'min_paths_decomposition')
    mode = _horizon_mode(T, count)
    kernel = partial(_decomposition_kernel, claims, arrivals, rare_set, r, mode, x)
    totals = reduce_sums(map_batches(kernel, n_paths, seed, workers=workers, batch_size=_batch_size()))
    counts = {key: int(value) for key, value in totals.items()}

    report = DecompositionReport(
        x=x,
        n_paths=n_paths,
        seed=seed,
        jump_at_least_one=MCValue.proportion(counts['jump_at_least_one'], n_paths),
        jump_at_least_two=MCValue.proportion(counts['jump_at_least_two'], n_paths),
        single_jump=MCValue.proportion(counts['single_jump'], n_paths),
        entrance=MCValue.proportion(counts['entrance'], n_paths),
        entrance_without_jump=MCValue.proportion(counts['entrance_without_jump'], n_paths),
        lambda_x=MCValue.mean(counts['jump_total'], counts['jump_total_sq'], n_paths),
        counts=counts,
    )
    min_hits = int(get_settings()['estimators']['min_hits'])
    if counts['entrance'] < min_hits:
        report.flags.append(f"only {counts['entrance']} entrance hits; the confidence interval is unreliable")
        logger.warning("decomposition (x=%g): only %d entrance hits", x, counts['entrance'])

    if asymptotic is None and match:
        asymptotic = _asymptotic(claims, arrivals, rare_set, r, T, x, seed)
    report.asymptotic = asymptotic
    return report


def ruin_mc(config: RiskConfig, claims: ClaimModel, arrivals: ArrivalModel, x: float, n_paths: int, seed: int,
            workers: int = 1, refine: bool = True, asymptotic: Optional[AsymptoticValue] = None,
            match: bool = True) -> EstimateReport:
    """
    Empirical ruin frequency at capital x, matched against the asymptotic value
    of A = l - L.

    With diffusion and refine=True, the same paths are also checked on the grid
    refined to h/2; the paired shift is reported and flagged when it exceeds one
    standard error of the estimate.

    Returns:
        EstimateReport with extra['refined_estimate'], extra['refinement_shift'],
        extra['refinement_shift_stderr'] when refined
    """
    _check_paths(n_paths)
    refine = bool(refine and config.is_diffusive)
    batch_size = _batch_size('surplus_batch_size') if config.is_diffusive else _batch_size()
    kernel = partial(_ruin_kernel, config, claims, arrivals, x, refine)
    totals = reduce_sums(map_batches(kernel, n_paths, seed, workers=workers, batch_size=batch_size))

    report = proportion_report("ruin", x, int(totals['hits']), n_paths, seed)
    if refine:
        shift = (totals['fine_hits'] - totals['hits']) / n_paths
        shift_se = math.sqrt(max(totals['shift_sq'] / n_paths - shift ** 2, 0.0) / n_paths)
        report.extra.update({
            'refined_estimate': totals['fine_hits'] / n_paths,
            'refinement_shift': shift,
            'refinement_shift_stderr': shift_se,
        })
        if abs(shift) > report.stderr:
            report.flag(f"grid bias: halving h shifts the estimate by {shift:.3g} (> one stderr {report.stderr:.3g})")

    if asymptotic is None and match:
        rare_set = config.rare_set()
        horizon = math.inf if config.is_infinite else config.horizon
        asymptotic = _asymptotic(claims, arrivals, rare_set, config.r, horizon, x, seed) if x > 0 else None
    report.match(asymptotic)
    return report
