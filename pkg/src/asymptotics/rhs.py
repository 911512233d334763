"""
Asymptotic Right-Hand Sides

    finite:    int_0^T   P(X exp(-r s) in xA) m(ds)
    infinite:  int_0^inf P(X exp(-r s) in xA) m(ds)
    MRV:       mu(A) V(x) int_0^T exp(-alpha r s) m(ds)

Pareto-polar claims are in the pure-power regime once x >= max_j (theta_j)_A;
there P(X exp(-r s) in xA) = mu(A) x^-alpha exp(-alpha r s) for every s >= 0 and
the integral collapses to a discounted mean-measure integral.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple
import logging
import math

import numpy as np
import pandas as pd

from arrivals.diagnostics import check_moment_condition, truncation_count
from arrivals.mean_measure import (
    IntegralResult,
    campbell_sum,
    integrate_to_infinity,
    mean_function,
    mean_measure_integral,
)
from arrivals.models import ArrivalModel, PoissonArrivals
from claims.claim_model import ClaimModel
from core.errors import AssumptionError, DivergenceError
from core.settings import get_settings
from geometry.rare_sets import RareSet

logger = logging.getLogger(__name__)

METHODS = ("exact-closed-form", "quadrature", "mc-assisted")

_METHOD_OF = {
    'quadrature': 'quadrature',
    'stieltjes': 'mc-assisted',
    'campbell-mc': 'mc-assisted',
}


@dataclass
class AsymptoticValue:
    """
    Asymptotic value with its provenance.

    Attributes:
        value: Probability-scale value
        method: 'exact-closed-form', 'quadrature' or 'mc-assisted'
        error: Quadrature tolerance or Monte Carlo standard error (0 when exact)
        converged: False when an infinite-horizon integral failed its convergence test
        notes: Flags raised along the way
    """

    value: float
    method: str
    error: float = 0.0
    converged: bool = True
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Unknown method: {self.method!r}")
        if self.value < 0:
            # quadrature round-off on a non-negative integrand
            self.value = 0.0

    def to_row(self, x: float) -> Dict:
        return {'x': x, 'asymptotic': self.value, 'method': self.method, 'error_bound': self.error}


def _from_integral(result: IntegralResult, factor: float = 1.0) -> AsymptoticValue:
    notes = [] if result.converged else ["infinite-horizon integral did not pass its convergence test"]
    return AsymptoticValue(
        value=factor * result.value,
        method=_METHOD_OF[result.method],
        error=abs(factor) * result.error,
        converged=result.converged,
        notes=notes,
    )


def _laplace_series(arrivals: ArrivalModel, s: float) -> Optional[Tuple[float, str]]:
    """
    sum_{i >= 1} E[exp(-s tau_i)] when the Laplace functional is exact.

    Returns None when the model only offers a bound.
    """
    if arrivals.laplace_is_bound:
        return None
    try:
        ratio = arrivals.laplace_ratio(s)
    except NotImplementedError:
        ratio = None
    if ratio is not None:
        return ratio / (1.0 - ratio), "exact-closed-form"

    cut = float(get_settings()['quadrature']['infinite_cut_ratio'])
    limit = int(get_settings()['truncation']['max_count'])
    total, start, block = 0.0, 1, 64
    while start <= limit:
        terms = arrivals.laplace(s, np.arange(start, start + block))
        total += float(np.sum(terms))
        if terms[-1] <= cut * total:
            return total, "quadrature"
        start += block
    raise DivergenceError(f"Laplace series of {arrivals.kind} arrivals did not settle within {limit} terms")


def discounted_mean_integral(arrivals: ArrivalModel, s: float, horizon: float,
                             seed: int = 0) -> AsymptoticValue:
    """
    int_0^T exp(-s t) m(dt) for s >= 0.

    Closed form for homogeneous Poisson, a Laplace series for infinite horizons
    with an exact Laplace functional, the generic mean-measure integral otherwise.
    """
    if s < 0:
        raise ValueError(f"s must be >= 0, got {s!r}")

    if isinstance(arrivals, PoissonArrivals):
        if math.isinf(horizon):
            if s == 0:
                raise DivergenceError("int_0^inf m(dt) is infinite for Poisson arrivals")
            return AsymptoticValue(value=arrivals.rate / s, method="exact-closed-form")
        if s == 0:
            return AsymptoticValue(value=arrivals.rate * horizon, method="exact-closed-form")
        return AsymptoticValue(value=arrivals.rate * -math.expm1(-s * horizon) / s, method="exact-closed-form")

    if math.isinf(horizon):
        if s == 0:
            raise DivergenceError("int_0^inf m(dt) needs a positive discount")
        series = _laplace_series(arrivals, s)
        if series is not None:
            value, method = series
            return AsymptoticValue(value=value, method=method)

    if s == 0:
        mean = mean_function(arrivals, horizon, seed=seed)
        return AsymptoticValue(value=mean.value, method="exact-closed-form" if mean.exact else "mc-assisted",
                               error=mean.stderr)

    result = mean_measure_integral(arrivals, lambda t: np.exp(-s * np.asarray(t, dtype=float)), horizon, seed=seed)
    return _from_integral(result)


def _tail_integrand(claims: ClaimModel, rare_set: RareSet, r: float, x: float) -> Callable:
    def f(s):
        return claims.tail(rare_set, x * np.exp(r * np.asarray(s, dtype=float)))
    return f


def finite_rhs(claims: ClaimModel, arrivals: ArrivalModel, rare_set: RareSet, r: float, T: float,
               x: float, seed: int = 0) -> AsymptoticValue:
    """
    int_0^T P(X exp(-r s) in xA) m(ds).

    Args:
        claims: Claim model
        arrivals: Arrival model
        rare_set: The set A
        r: Interest force >= 0
        T: Finite horizon
        x: Positive scale
        seed: Seed for empirical mean-measure caches

    Returns:
        AsymptoticValue
    """
    if not x > 0:
        raise ValueError(f"x must be positive, got {x!r}")
    if not (0 < T < math.inf):
        raise ValueError(f"T must be positive and finite, got {T!r}")
    if not r >= 0:
        raise ValueError(f"r must be >= 0, got {r!r}")

    if T < arrivals.earliest_arrival:
        return AsymptoticValue(value=0.0, method="exact-closed-form", notes=["m(T) = 0: no arrival can occur before T"])

    if claims.radial.is_regularly_varying and claims.is_pure_power(rare_set, x):
        alpha = claims.radial.alpha
        weight = discounted_mean_integral(arrivals, alpha * r, T, seed=seed)
        factor = claims.mu(rare_set) * x ** (-alpha)
        return AsymptoticValue(value=factor * weight.value, method=weight.method, error=factor * weight.error,
                               converged=weight.converged, notes=weight.notes)

    if r == 0:
        mean = mean_function(arrivals, T, seed=seed)
        tail = claims.tail(rare_set, x)
        return AsymptoticValue(value=tail * mean.value, method="exact-closed-form" if mean.exact else "mc-assisted",
                               error=tail * mean.stderr)

    result = mean_measure_integral(arrivals, _tail_integrand(claims, rare_set, r, x), T, seed=seed)
    return _from_integral(result)


def infinite_rhs(claims: ClaimModel, arrivals: ArrivalModel, rare_set: RareSet, r: float, x: float,
                 q1: Optional[float] = None, q2: Optional[float] = None, count: Optional[int] = None,
                 paths: Optional[int] = None, seed: int = 0) -> AsymptoticValue:
    """
    int_0^inf P(X exp(-r s) in xA) m(ds).

    Args:
        claims: Claim model
        arrivals: Arrival model
        rare_set: The set A
        r: Interest force > 0
        x: Positive scale
        q1, q2: Moment window; when given the moment condition is checked first
        count: Truncation count for the Campbell fallback
        paths: Paths for the Campbell fallback
        seed: Seed for the Campbell fallback

    Returns:
        AsymptoticValue

    Raises:
        DivergenceError: r <= 0
        AssumptionError: the moment condition fails
    """
    if not x > 0:
        raise ValueError(f"x must be positive, got {x!r}")
    if not r > 0:
        raise DivergenceError(f"the infinite-horizon integral needs r > 0, got r={r}")

    if q1 is not None and q2 is not None:
        report = check_moment_condition(claims, arrivals, r, q1, q2)
        if not report.holds:
            raise AssumptionError(report.summary())

    if claims.radial.is_regularly_varying and claims.is_pure_power(rare_set, x):
        alpha = claims.radial.alpha
        try:
            weight = discounted_mean_integral(arrivals, alpha * r, math.inf, seed=seed)
        except DivergenceError as e:
            logger.warning("%s; falling back to the generic integral", e)
        else:
            factor = claims.mu(rare_set) * x ** (-alpha)
            return AsymptoticValue(value=factor * weight.value, method=weight.method, error=factor * weight.error,
                                   converged=weight.converged, notes=weight.notes)

    f = _tail_integrand(claims, rare_set, r, x)

    if arrivals.is_analytic:
        cut = float(get_settings()['quadrature']['infinite_cut_ratio'])
        g = lambda s: float(f(s) * arrivals.density(s))
        stop = lambda s, total: total > 0 and f(s) < cut * total
        return _from_integral(integrate_to_infinity(g, arrivals.integration_scale, arrivals, stop=stop))

    if count is None:
        count = int(get_settings()['truncation']['default_count'])
        if q1 is not None and q2 is not None:
            count = max(count, truncation_count(claims, arrivals, r, q1, q2, tolerance=1e-12))
    paths = int(paths or get_settings()['mean_measure']['paths'])
    return _from_integral(campbell_sum(arrivals, f, count, paths, seed=seed))


def mrv_rhs(alpha: float, mu_A: float, radial_tail: Callable[[float], float], arrivals: ArrivalModel,
            r: float, T: float, x: float, seed: int = 0) -> AsymptoticValue:
    """
    mu(A) V(x) int_0^T exp(-alpha r s) m(ds), T finite or math.inf.

    Args:
        alpha: Regular variation index
        mu_A: Limit-measure mass mu(A)
        radial_tail: V, the normalizing tail
        arrivals: Arrival model
        r: Interest force
        T: Horizon
        x: Positive scale
        seed: Seed for empirical mean-measure caches

    Returns:
        AsymptoticValue
    """
    if not 0 < alpha < math.inf:
        raise ValueError(f"alpha must lie in (0, inf), got {alpha!r}")
    if not 0 < mu_A < math.inf:
        raise ValueError(f"mu(A) must lie in (0, inf), got {mu_A!r}")

    weight = discounted_mean_integral(arrivals, alpha * r, T, seed=seed)
    factor = mu_A * float(radial_tail(x))
    return AsymptoticValue(value=factor * weight.value, method=weight.method, error=factor * weight.error,
                           converged=weight.converged, notes=weight.notes)


def write_asymptotic_csv(rows: List[Dict], path: Path) -> Path:
    """(x, asymptotic, method, error_bound) rows"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=['x', 'asymptotic', 'method', 'error_bound']).to_csv(path, index=False)
    return path
