"""
Single Big Jump for Weighted Sums

For a short claim sequence Z_1, ..., Z_n and weights c in [a, b]^n, compares

    P(sum_i c_i Z_i in xA)   with   sum_i P(c_i Z_i in xA)

over a grid of weight vectors and scales. The numerator is estimated by Monte
Carlo on one shared set of simulated sequences, the denominator is exact. For
n = 2 independent polar claims an exact one-dimensional integral is available.
"""

from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence
import itertools
import logging
import math

import numpy as np
from scipy import integrate

from claims.claim_model import ClaimModel
from core.settings import get_settings
from core.streams import map_batches, reduce_sums
from geometry.rare_sets import RareSet, functional_XA

logger = logging.getLogger(__name__)


@dataclass
class WeightedSumRow:
    """One (x, c) cell"""

    x: float
    weights: List[float]
    ratio: float
    stderr: float
    hits: int
    single_sum: float
    oracle_ratio: Optional[float] = None


@dataclass
class WeightedSumTable:
    """Ratios over the (x, c) grid"""

    rows: List[WeightedSumRow]
    n_paths: int
    seed: int
    flags: List[str] = field(default_factory=list)

    def max_deviation(self) -> Dict[float, float]:
        """max_c |ratio - 1| per x"""
        result: Dict[float, float] = {}
        for row in self.rows:
            result[row.x] = max(result.get(row.x, 0.0), abs(row.ratio - 1.0))
        return result

    def to_rows(self) -> List[Dict]:
        return [
            {
                'x': row.x,
                'weights': " ".join(f"{w:g}" for w in row.weights),
                'ratio': row.ratio,
                'stderr': row.stderr,
                'oracle_ratio': row.oracle_ratio if row.oracle_ratio is not None else math.nan,
                'hits': row.hits,
            }
            for row in self.rows
        ]


def weight_grid(n: int, low: float, high: float, points: int) -> List[List[float]]:
    """All weight vectors with entries on an even grid of [low, high]^n, endpoints included"""
    if not 0 < low <= high < math.inf:
        raise ValueError(f"need 0 < a <= b < inf, got a={low!r}, b={high!r}")
    values = np.linspace(low, high, points) if points > 1 else np.array([low])
    return [list(c) for c in itertools.product(values.tolist(), repeat=n)]


def _weighted_sum_kernel(claims, rare_set, weights, scales, length, rng, n) -> Dict:
    sequences = claims.sample_paths(rng, n, length)
    sums = np.einsum('cl,nld->cnd', weights, sequences)
    levels = functional_XA(rare_set, sums)
    hits = (levels[:, :, None] > scales[None, None, :]).sum(axis=1)
    return {'hits': hits.astype(np.int64)}


def weighted_sum_oracle(claims: ClaimModel, rare_set: RareSet, c: Sequence[float], x: float) -> float:
    """
    Exact P(c1 Z1 + c2 Z2 in xA) for two independent polar claims.

    Conditioning on the atom pair (j, k) and on R1 = t, the event is certain once
    max_p c1 t (p'theta_j) > x; otherwise it is {R2 > min_p (x - c1 t p'theta_j) / (c2 p'theta_k)}
    over directions with p'theta_k > 0.
    """
    if not claims.is_iid:
        raise ValueError("the oracle needs independent claims")
    c1, c2 = float(c[0]), float(c[1])
    atoms = claims.spectral.atoms
    weights = claims.spectral.weights
    radial = claims.radial
    directions = rare_set.directions
    settings = get_settings()['quadrature']

    total = 0.0
    for j, k in itertools.product(range(len(atoms)), repeat=2):
        a = directions @ atoms[j]
        b = directions @ atoms[k]
        reach = b > 0
        a_max = float(a.max())
        cutoff = x / (c1 * a_max) if a_max > 0 else math.inf

        def conditional(t):
            if not np.any(reach):
                return 0.0
            needed = np.min((x - c1 * t * a[reach]) / (c2 * b[reach]))
            return float(radial.sf(needed)) if needed > 0 else 1.0

        lower = radial.lower_endpoint
        part = float(radial.sf(cutoff)) if math.isfinite(cutoff) else 0.0
        if cutoff > lower:
            value, _ = integrate.quad(lambda t: conditional(t) * float(radial.pdf(t)), lower, cutoff,
                                      epsabs=settings['epsabs'], epsrel=settings['epsrel'],
                                      limit=int(settings['limit']))
            part += value
        total += weights[j] * weights[k] * part
    return total


def weighted_sum_ratio(claims: ClaimModel, weights: Sequence[Sequence[float]], rare_set: RareSet,
                       x_grid: Sequence[float], n_paths: int, seed: int, workers: int = 1,
                       with_oracle: bool = True) -> WeightedSumTable:
    """
    P(sum_i c_i Z_i in xA) / sum_i P(c_i Z_i in xA) over weight vectors and scales.

    Args:
        claims: Claim model of the sequence Z (dependence along the index)
        weights: Weight vectors c, all of length n in {2, 3}, entries > 0
        rare_set: The set A
        x_grid: Scales
        n_paths: Simulated sequences (shared by every cell)
        seed: Master seed
        workers: Worker processes
        with_oracle: Attach the exact ratio when n = 2 and claims are independent

    Returns:
        WeightedSumTable
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 2 or weights.shape[1] not in (2, 3):
        raise ValueError(f"weights must be a list of 2- or 3-vectors, got shape {weights.shape}")
    if np.any(weights <= 0):
        raise ValueError("weights must be strictly positive")
    scales = np.asarray(x_grid, dtype=float)
    length = weights.shape[1]

    kernel = partial(_weighted_sum_kernel, claims, rare_set, weights, scales, length)
    batch_size = int(get_settings()['simulation']['batch_size'])
    hits = reduce_sums(map_batches(kernel, n_paths, seed, workers=workers, batch_size=batch_size))['hits']

    use_oracle = with_oracle and length == 2 and claims.is_iid
    min_hits = int(get_settings()['estimators']['min_hits'])
    table = WeightedSumTable(rows=[], n_paths=n_paths, seed=seed)

    for ci, c in enumerate(weights):
        for xi, x in enumerate(scales):
            single = float(sum(claims.tail(rare_set, x / w) for w in c))
            p = hits[ci, xi] / n_paths
            stderr = math.sqrt(p * (1 - p) / n_paths)
            ratio = p / single if single > 0 else math.nan
            oracle = weighted_sum_oracle(claims, rare_set, c, x) / single if use_oracle and single > 0 else None
            table.rows.append(WeightedSumRow(
                x=float(x), weights=c.tolist(), ratio=ratio, stderr=stderr / single if single > 0 else math.nan,
                hits=int(hits[ci, xi]), single_sum=single, oracle_ratio=oracle,
            ))
            if hits[ci, xi] < min_hits:
                message = f"only {int(hits[ci, xi])} hits at x={x:g}, c={c.tolist()}"
                logger.warning(message)
                table.flags.append(message)
    return table
