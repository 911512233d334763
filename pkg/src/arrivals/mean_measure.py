"""
Mean Measure

m(t) = E[N(t)] and integrals against m(ds):

- closed form for the Poisson kinds (adaptive Gauss-Kronrod quadrature on the density),
- an empirical cache of m on a grid for every other kind (Stieltjes sums),
- a Campbell Monte Carlo sum sum_i E[f(tau_i)] for infinite horizons without a density.

The empirical cache is built once per (model, horizon, nodes, paths, seed) under
a lock; reads after the build are lock-free.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple
import logging
import math
import threading

import numpy as np
import pandas as pd
from scipy import integrate

from core.settings import get_settings
from core.streams import batch_rng, iter_batches
from .models import ArrivalModel

logger = logging.getLogger(__name__)

# spawn_key worker slot reserved for cache and Campbell streams
CACHE_STREAM = 1_000_003
CAMPBELL_STREAM = 1_000_033

_CACHE: Dict[Tuple, "MeanMeasure"] = {}
_CACHE_LOCK = threading.Lock()


@dataclass
class MeanValue:
    """m(t) with its Monte Carlo standard error (0 when exact)"""

    value: float
    stderr: float
    exact: bool


@dataclass
class IntegralResult:
    """
    Value of an integral against m(ds).

    Attributes:
        value: Integral value
        error: Quadrature error estimate or Monte Carlo standard error
        method: 'quadrature', 'stieltjes' or 'campbell-mc'
        converged: False when an infinite-horizon integral failed its convergence test
    """

    value: float
    error: float
    method: str
    converged: bool = True


@dataclass
class MeanMeasure:
    """
    Empirical m(t) on a uniform grid.

    Attributes:
        grid: Node times 0 = t_0 < ... < t_n
        values: m at the nodes
        stderr: Monte Carlo standard error at the nodes
        paths: Number of simulated paths
        step: Grid step
    """

    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    paths: int
    step: float

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def value(self, t) -> np.ndarray:
        return np.interp(t, self.grid, self.values)

    def stderr_at(self, t) -> np.ndarray:
        return np.interp(t, self.grid, self.stderr)

    def stieltjes(self, f: Callable, horizon: float) -> IntegralResult:
        """
        Stieltjes sum of f against the cached m over [0, horizon].

        The error combines the Monte Carlo error of m(horizon) scaled by max|f| and
        the Riemann-Stieltjes gap sum |f(right) - f(left)| dm.
        """
        if horizon > self.horizon * (1 + 1e-12):
            raise ValueError(f"cache covers [0, {self.horizon}], asked for {horizon}")

        points = np.append(self.grid[self.grid < horizon], horizon)
        levels = self.value(points)
        increments = np.diff(levels)
        left, right = points[:-1], points[1:]

        f_mid = np.asarray(f(0.5 * (left + right)), dtype=float)
        f_left = np.asarray(f(left), dtype=float)
        f_right = np.asarray(f(right), dtype=float)

        value = float(np.sum(f_mid * increments))
        gap = float(np.sum(np.abs(f_right - f_left) * increments))
        scale = float(np.max(np.abs(np.concatenate([f_left, f_right])))) if left.size else 0.0
        error = scale * float(self.stderr_at(horizon)) + gap
        return IntegralResult(value=value, error=error, method="stieltjes")

    def to_csv(self, path: Path):
        """Export (t, m, stderr)"""
        frame = pd.DataFrame({'t': self.grid, 'm': self.values, 'stderr': self.stderr})
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)


def build_mean_cache(model: ArrivalModel, horizon: float, nodes: Optional[int] = None,
                     paths: Optional[int] = None, seed: int = 0) -> MeanMeasure:
    """
    Estimate m on a uniform grid over [0, horizon] from simulated paths.

    Args:
        model: Arrival model
        horizon: Right end of the grid
        nodes: Number of grid cells (default from settings)
        paths: Number of simulated paths (default from settings)
        seed: Master seed of the cache stream

    Returns:
        MeanMeasure
    """
    settings = get_settings()
    nodes = int(nodes or settings['mean_measure']['nodes'])
    paths = int(paths or settings['mean_measure']['paths'])
    batch_size = int(settings['simulation']['batch_size'])

    grid = np.linspace(0.0, horizon, nodes + 1)
    step = horizon / nodes
    total = np.zeros(nodes + 1)
    total_sq = np.zeros(nodes + 1)

    for batch, size in iter_batches(paths, batch_size):
        rng = batch_rng(seed, CACHE_STREAM, batch)
        arrivals = model.sample(rng, size, horizon=horizon)
        hist = np.zeros((size, nodes + 1))
        rows, cols = np.nonzero(arrivals.mask)
        # first node at or after each arrival
        node = np.minimum(np.ceil(arrivals.times[rows, cols] / step).astype(int), nodes)
        np.add.at(hist, (rows, node), 1.0)
        counts = np.cumsum(hist, axis=1)
        total += counts.sum(axis=0)
        total_sq += (counts ** 2).sum(axis=0)

    values = total / paths
    variance = np.maximum(total_sq / paths - values ** 2, 0.0)
    stderr = np.sqrt(variance / paths)
    # a running mean of non-decreasing counting paths is non-decreasing
    values = np.maximum.accumulate(values)

    logger.debug("Built mean-measure cache for %s on [0, %g] with %d paths", model.kind, horizon, paths)
    return MeanMeasure(grid=grid, values=values, stderr=stderr, paths=paths, step=step)


def cached_mean_measure(model: ArrivalModel, horizon: float, nodes: Optional[int] = None,
                        paths: Optional[int] = None, seed: int = 0) -> MeanMeasure:
    """Shared cache lookup; builds at most once per key"""
    settings = get_settings()
    nodes = int(nodes or settings['mean_measure']['nodes'])
    paths = int(paths or settings['mean_measure']['paths'])

    for key, cache in list(_CACHE.items()):
        if key[0] == model and key[2:] == (nodes, paths, seed) and key[1] >= horizon:
            return cache

    with _CACHE_LOCK:
        span = horizon * float(settings['mean_measure']['horizon_padding'])
        key = (model, span, nodes, paths, seed)
        if key not in _CACHE:
            _CACHE[key] = build_mean_cache(model, span, nodes=nodes, paths=paths, seed=seed)
        return _CACHE[key]


def clear_mean_cache():
    with _CACHE_LOCK:
        _CACHE.clear()


def mean_function(model: ArrivalModel, t: float, seed: int = 0) -> MeanValue:
    """
    m(t) = E[N(t)].

    Exact for the Poisson kinds; other kinds fall back to the empirical cache
    and report its standard error.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    if model.is_analytic:
        return MeanValue(value=float(model.mean(t)), stderr=0.0, exact=True)
    if t == 0:
        return MeanValue(value=0.0, stderr=0.0, exact=True)

    logger.debug("%s arrivals have no closed-form m(t); using the empirical cache", model.kind)
    cache = cached_mean_measure(model, t, seed=seed)
    return MeanValue(value=float(cache.value(t)), stderr=float(cache.stderr_at(t)), exact=False)


def _quadrature_points(model: ArrivalModel, lower: float, upper: float):
    period = getattr(model, 'period', None)
    if period is None:
        return None
    points = np.arange(math.floor(lower / period) + 1, math.ceil(upper / period)) * period
    points = points[(points > lower) & (points < upper)]
    return points[:50].tolist() or None


def _quad(g: Callable, lower: float, upper: float, model: ArrivalModel) -> Tuple[float, float]:
    settings = get_settings()['quadrature']
    value, error = integrate.quad(
        g, lower, upper,
        epsabs=settings['epsabs'],
        epsrel=settings['epsrel'],
        limit=int(settings['limit']),
        points=_quadrature_points(model, lower, upper),
    )
    return value, error


def integrate_to_infinity(g: Callable, scale: float, model: ArrivalModel,
                          stop: Optional[Callable[[float, float], bool]] = None) -> IntegralResult:
    """
    Integrate g over [0, inf) chunk by chunk.

    Chunks start at the model's time scale and double up to 64 times that. The
    integral is accepted once two consecutive chunks fall below
    infinite_cut_ratio times the running value, or once stop(s, total) says so.
    """
    settings = get_settings()['quadrature']
    cut = float(settings['infinite_cut_ratio'])
    max_chunks = int(settings['max_chunks'])

    total, error = 0.0, 0.0
    start, width = 0.0, scale
    quiet = 0
    for _ in range(max_chunks):
        value, chunk_error = _quad(g, start, start + width, model)
        total += value
        error += chunk_error
        start += width
        width = min(2.0 * width, 64.0 * scale)

        if stop is not None and stop(start, total):
            return IntegralResult(value=total, error=error, method="quadrature")
        quiet = quiet + 1 if abs(value) <= cut * abs(total) else 0
        if quiet >= 2:
            return IntegralResult(value=total, error=error, method="quadrature")

    logger.warning("Infinite-horizon integral did not converge after %d chunks (value so far %g)", max_chunks, total)
    return IntegralResult(value=total, error=error, method="quadrature", converged=False)


def campbell_sum(model: ArrivalModel, f: Callable, count: int, paths: int,
                 seed: int = 0) -> IntegralResult:
    """
    sum_{i <= count} E[f(tau_i)] by Monte Carlo over count-truncated paths.

    By Campbell's formula this is the integral of f against m(ds) up to the
    count-th arrival. converged is False when the last arrival still carries a
    non-negligible share of the value.
    """
    batch_size = int(get_settings()['simulation']['batch_size'])
    total, total_sq, last_term = 0.0, 0.0, 0.0

    for batch, size in iter_batches(paths, batch_size):
        rng = batch_rng(seed, CAMPBELL_STREAM, batch)
        arrivals = model.sample(rng, size, count=count)
        terms = np.asarray(f(arrivals.times), dtype=float)
        per_path = terms.sum(axis=1)
        total += per_path.sum()
        total_sq += (per_path ** 2).sum()
        if count:
            last_term += terms[:, -1].sum()

    value = total / paths
    stderr = math.sqrt(max(total_sq / paths - value ** 2, 0.0) / paths)
    last = last_term / paths
    converged = value == 0 or last <= 1e-6 * value
    return IntegralResult(value=value, error=stderr, method="campbell-mc", converged=bool(converged))


def mean_measure_integral(model: ArrivalModel, f: Callable, horizon: float, seed: int = 0,
                          count: Optional[int] = None, paths: Optional[int] = None) -> IntegralResult:
    """
    Integral of f over [0, horizon] against m(ds).

    Args:
        model: Arrival model
        f: Non-negative integrand, must accept numpy arrays
        horizon: Finite T or math.inf
        seed: Seed for empirical caches / Campbell sums
        count: Truncation count for Campbell sums (infinite horizon, non-analytic kinds)
        paths: Paths for Campbell sums

    Returns:
        IntegralResult
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")

    if model.is_analytic:
        g = lambda s: float(f(s) * model.density(s))
        if math.isinf(horizon):
            return integrate_to_infinity(g, model.integration_scale, model)
        value, error = _quad(g, 0.0, horizon, model)
        return IntegralResult(value=value, error=error, method="quadrature")

    if not math.isinf(horizon):
        return cached_mean_measure(model, horizon, seed=seed).stieltjes(f, horizon)

    settings = get_settings()
    count = int(count or settings['truncation']['default_count'])
    paths = int(paths or settings['mean_measure']['paths'])
    result = campbell_sum(model, f, count, paths, seed=seed)
    if not result.converged:
        logger.warning("Campbell sum over %d arrivals has not settled; the infinite integral may diverge", count)
    return result
