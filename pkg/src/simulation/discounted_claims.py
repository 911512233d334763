"""
Discounted Aggregate Claims

D(T) = sum_{tau_i <= T} X_i exp(-r tau_i), simulated a batch of paths at a time,
plus the single-path PathRecord API and per-claim trace export.

Arrival times are drawn first and claim vectors second from the same generator,
so two kernels given equal (rng, n_paths, horizon) see identical claims.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional
import logging

import numpy as np
import pandas as pd

from arrivals.diagnostics import check_moment_condition, moment_exponent, moment_series_tail
from arrivals.models import ArrivalModel
from claims.claim_model import ClaimModel
from core.errors import AssumptionError
from geometry.rare_sets import RareSet, functional_XA

logger = logging.getLogger(__name__)


@dataclass
class ClaimDraw:
    """
    Claims of a batch of paths.

    Attributes:
        times: (n, k) arrival times, +inf padded
        claims: (n, k, d) claim vectors, 0 beyond each path's count
        discount: (n, k) exp(-r tau_i), 0 beyond each path's count
        counts: (n,) arrivals per path
    """

    times: np.ndarray
    claims: np.ndarray
    discount: np.ndarray
    counts: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.times.shape[0]

    @property
    def mask(self) -> np.ndarray:
        return np.isfinite(self.times)

    @property
    def discounted(self) -> np.ndarray:
        return self.claims * self.discount[..., None]

    def aggregate(self) -> np.ndarray:
        """D per path, shape (n, d)"""
        return self.discounted.sum(axis=1)

    def running(self) -> np.ndarray:
        """D right after each arrival, shape (n, k, d)"""
        return np.cumsum(self.discounted, axis=1)

    def jump_flags(self, rare_set: RareSet, x: float) -> np.ndarray:
        """1{X_i exp(-r tau_i) in xA}, shape (n, k)"""
        if self.times.shape[1] == 0:
            return np.zeros(self.times.shape, dtype=bool)
        return (functional_XA(rare_set, self.discounted) > x) & self.mask


def simulate_D_batch(claims: ClaimModel, arrivals: ArrivalModel, r: float, rng: np.random.Generator,
                     n_paths: int, horizon: Optional[float] = None, count: Optional[int] = None) -> ClaimDraw:
    """
    Draw arrival times and claims for n_paths paths.

    Args:
        claims: Claim model
        arrivals: Arrival model
        r: Interest force
        rng: Random generator
        n_paths: Number of paths
        horizon: Finite T (or pass count)
        count: First count arrivals (infinite-horizon truncation)

    Returns:
        ClaimDraw
    """
    batch = arrivals.sample(rng, n_paths, horizon=horizon, count=count)
    vectors = claims.sample_paths(rng, n_paths, batch.width)

    mask = batch.mask
    safe_times = np.where(mask, batch.times, 0.0)
    discount = np.where(mask, np.exp(-r * safe_times), 0.0)
    vectors = np.where(mask[..., None], vectors, 0.0)

    return ClaimDraw(times=batch.times, claims=vectors, discount=discount, counts=batch.counts)


@dataclass
class PathRecord:
    """
    One simulated path.

    Attributes:
        D: Discounted aggregate claims at the horizon (d,)
        arrivals_used: Number of arrivals summed
        jump_flags: Per-claim indicator of X_i exp(-r tau_i) in xA (empty without a diagnostic set)
        times: Arrival times used
        claims: Claim vectors used, (arrivals_used, d)
        discount: Discount factors used
        first_entrance: First grid/arrival time with U in L (surplus runs)
        remainder_bound: Certified series remainder (infinite-horizon runs)
    """

    D: np.ndarray
    arrivals_used: int
    jump_flags: np.ndarray
    times: np.ndarray
    claims: np.ndarray
    discount: np.ndarray
    first_entrance: Optional[float] = None
    remainder_bound: Optional[float] = None

    @property
    def jump_count(self) -> int:
        return int(np.sum(self.jump_flags))


def _record(draw: ClaimDraw, rare_set: Optional[RareSet], x: Optional[float], **extra) -> PathRecord:
    k = int(draw.counts[0])
    if rare_set is not None and x is not None:
        flags = draw.jump_flags(rare_set, x)[0, :k]
    else:
        flags = np.zeros(0, dtype=bool)
    return PathRecord(
        D=draw.aggregate()[0],
        arrivals_used=k,
        jump_flags=flags,
        times=draw.times[0, :k],
        claims=draw.claims[0, :k],
        discount=draw.discount[0, :k],
        **extra,
    )


def simulate_D(claims: ClaimModel, arrivals: ArrivalModel, r: float, horizon: float,
               rng: np.random.Generator, rare_set: Optional[RareSet] = None,
               x: Optional[float] = None) -> PathRecord:
    """
    One path of D(T) with jump flags against the diagnostic (x, A).

    Args:
        claims: Claim model
        arrivals: Arrival model
        r: Interest force >= 0
        horizon: Finite T
        rng: Random generator
        rare_set: Diagnostic set A
        x: Diagnostic scale

    Returns:
        PathRecord
    """
    if not r >= 0:
        raise ValueError(f"r must be >= 0, got {r!r}")
    draw = simulate_D_batch(claims, arrivals, r, rng, 1, horizon=horizon)
    return _record(draw, rare_set, x)


def simulate_D_infinite(claims: ClaimModel, arrivals: ArrivalModel, r: float, count: int,
                        q1: float, q2: float, rng: np.random.Generator,
                        rare_set: Optional[RareSet] = None, x: Optional[float] = None) -> PathRecord:
    """
    Partial sum of D(inf) over the first count arrivals with a certified remainder.

    The remainder bound is sum_{i > count} (E[exp(-q1 r tau_i)] v E[exp(-q2 r tau_i)])^(1/q),
    q = 1 if J+ < 1 else q2.

    Raises:
        AssumptionError: the moment condition fails for (claims, arrivals, r, q1, q2)
        DivergenceError: the series has no closed form for this arrival kind
    """
    report = check_moment_condition(claims, arrivals, r, q1, q2)
    if not report.holds:
        raise AssumptionError(report.summary())

    q = moment_exponent(report.j_plus, q2)
    remainder = moment_series_tail(arrivals, r, q1, q2, q, start=int(count))
    draw = simulate_D_batch(claims, arrivals, r, rng, 1, count=int(count))
    return _record(draw, rare_set, x, remainder_bound=remainder)


def write_trace_csv(records: List[PathRecord], path: Path) -> Path:
    """
    Per-claim trace: path id, tau_i, claim components, discount factor, running D.

    Args:
        records: Simulated paths
        path: Output CSV

    Returns:
        The written path
    """
    rows = []
    for path_id, record in enumerate(records):
        running = np.cumsum(record.claims * record.discount[:, None], axis=0)
        for i in range(record.arrivals_used):
            row = {'path': path_id, 'tau': record.times[i]}
            row.update({f"X{j + 1}": value for j, value in enumerate(record.claims[i])})
            row['discount'] = record.discount[i]
            row.update({f"D{j + 1}": value for j, value in enumerate(running[i])})
            rows.append(row)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(path, index=False)
    logger.info("Wrote %d trace rows to %s", len(rows), path)
    return path
