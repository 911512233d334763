"""
Surplus Paths

Perturbed surplus U(t) evaluated at grid nodes and at every arrival instant.

Diffusion: W(t) = int_0^t exp(-r s) dB(s) is a Gaussian process with independent
increments and variance clock v(t) = int_0^t exp(-2 r s) ds. Increments on the
grid are exact, and values at arrival instants are filled in by sequential
Brownian-bridge draws on the v clock, so every evaluated value has the exact law.

Without diffusion, U only moves down at arrival instants, so detection at those
instants is exact and the infinite horizon (count truncation) is supported.
"""

from dataclasses import dataclass
from typing import Optional, Tuple
import logging
import math

import numpy as np

from arrivals.models import ArrivalModel
from claims.claim_model import ClaimModel
from .discounted_claims import ClaimDraw, PathRecord, simulate_D_batch
from .risk_config import RiskConfig, discount_clock

logger = logging.getLogger(__name__)


@dataclass
class SurplusBatch:
    """
    First entrance times of a batch of surplus paths.

    Attributes:
        draw: Claims of the batch
        first_entrance: (n,) first time with U in L on the configured grid, +inf if none
        first_entrance_fine: (n,) the same on the grid refined to h/2 (refinement runs only)
        grid_step: Effective configured step
    """

    draw: ClaimDraw
    first_entrance: np.ndarray
    first_entrance_fine: Optional[np.ndarray] = None
    grid_step: float = math.nan

    @property
    def ruined(self) -> np.ndarray:
        return np.isfinite(self.first_entrance)

    @property
    def ruined_fine(self) -> Optional[np.ndarray]:
        if self.first_entrance_fine is None:
            return None
        return np.isfinite(self.first_entrance_fine)


def time_grid(horizon: float, step: float) -> np.ndarray:
    """Uniform nodes 0 = t_0 < ... < t_K = T with spacing T / K <= step"""
    cells = max(1, int(math.ceil(horizon / step - 1e-9)))
    return np.linspace(0.0, horizon, cells + 1)


def _first_time(hits: np.ndarray, times: np.ndarray) -> np.ndarray:
    """First time along the last axis where hits is True, +inf if never"""
    if hits.shape[-1] == 0:
        return np.full(hits.shape[:-1], np.inf)
    index = np.argmax(hits, axis=-1)
    if times.ndim == 1:
        chosen = times[index]
    else:
        chosen = np.take_along_axis(times, index[:, None], axis=1)[:, 0]
    return np.where(np.any(hits, axis=-1), chosen, np.inf)


def _diffusion_paths(config: RiskConfig, draw: ClaimDraw, grid: np.ndarray,
                     rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """W on the grid (n, K+1, d) and at the arrival instants (n, k, d)"""
    n, k = draw.times.shape
    d = config.dim
    factor = config.brownian_factor
    clock = discount_clock(grid, config.r)

    increments = rng.standard_normal((n, grid.size - 1, d)) @ factor.T
    increments *= np.sqrt(np.diff(clock))[None, :, None]
    on_grid = np.concatenate([np.zeros((n, 1, d)), np.cumsum(increments, axis=1)], axis=1)

    at_arrivals = np.zeros((n, k, d))
    mask = draw.mask
    safe = np.where(mask, draw.times, 0.0)
    cell = np.clip(np.searchsorted(grid, safe, side='left'), 1, grid.size - 1)
    rows = np.arange(n)

    for i in range(k):
        left_time = grid[cell[:, i] - 1]
        left_value = on_grid[rows, cell[:, i] - 1]
        if i > 0:
            same = mask[:, i - 1] & (cell[:, i - 1] == cell[:, i])
            left_time = np.where(same, safe[:, i - 1], left_time)
            left_value = np.where(same[:, None], at_arrivals[:, i - 1], left_value)
        right_time = grid[cell[:, i]]
        right_value = on_grid[rows, cell[:, i]]

        v_left = discount_clock(left_time, config.r)
        v_mid = discount_clock(safe[:, i], config.r)
        v_right = discount_clock(right_time, config.r)
        span = v_right - v_left
        positive = span > 0
        weight = np.where(positive, (v_mid - v_left) / np.where(positive, span, 1.0), 1.0)
        variance = np.where(positive, (v_mid - v_left) * (v_right - v_mid) / np.where(positive, span, 1.0), 0.0)

        noise = rng.standard_normal((n, d)) @ factor.T
        value = left_value + weight[:, None] * (right_value - left_value) + np.sqrt(np.maximum(variance, 0.0))[:, None] * noise
        at_arrivals[:, i] = np.where(mask[:, i, None], value, 0.0)

    return on_grid, at_arrivals


def _aggregate_on_grid(draw: ClaimDraw, grid: np.ndarray) -> np.ndarray:
    """D(t_j) for every node, shape (n, K+1, d)"""
    n, k = draw.times.shape
    d = draw.claims.shape[-1]
    binned = np.zeros((n, grid.size, d))
    rows, cols = np.nonzero(draw.mask)
    # first node at or after each arrival
    node = np.clip(np.searchsorted(grid, draw.times[rows, cols], side='left'), 0, grid.size - 1)
    np.add.at(binned, (rows, node), draw.discounted[rows, cols])
    return np.cumsum(binned, axis=1)


def simulate_surplus_batch(config: RiskConfig, claims: ClaimModel, arrivals: ArrivalModel, x: float,
                           rng: np.random.Generator, n_paths: int, refine: bool = False) -> SurplusBatch:
    """
    First entrance of U into L for n_paths paths at capital x.

    Args:
        config: Risk configuration
        claims: Claim model
        arrivals: Arrival model
        x: Initial capital (>= 0)
        rng: Random generator
        n_paths: Number of paths
        refine: Also detect on the grid refined to h/2 (same paths)

    Returns:
        SurplusBatch
    """
    if not x >= 0:
        raise ValueError(f"capital x must be >= 0, got {x!r}")

    if config.is_infinite:
        draw = simulate_D_batch(claims, arrivals, config.r, rng, n_paths, count=int(config.truncation))
    else:
        draw = simulate_D_batch(claims, arrivals, config.r, rng, n_paths, horizon=config.horizon)

    base = x * config.allocation
    mask = draw.mask
    safe = np.where(mask, draw.times, 0.0)
    surplus_at_arrivals = base + config.premium_integral(safe) - draw.running()

    if not config.is_diffusive:
        hits = config.ruin_set.contains(surplus_at_arrivals) & mask
        first = _first_time(hits, draw.times)
        return SurplusBatch(draw=draw, first_entrance=first, first_entrance_fine=first.copy() if refine else None)

    coarse_cells = time_grid(config.horizon, config.grid_step).size - 1
    grid = np.linspace(0.0, config.horizon, (2 * coarse_cells if refine else coarse_cells) + 1)

    on_grid, at_arrivals = _diffusion_paths(config, draw, grid, rng)
    surplus_at_arrivals = surplus_at_arrivals + config.diffusion * at_arrivals
    surplus_on_grid = base + config.premium_integral(grid) - _aggregate_on_grid(draw, grid) + config.diffusion * on_grid

    arrival_hits = config.ruin_set.contains(surplus_at_arrivals) & mask
    grid_hits = config.ruin_set.contains(surplus_on_grid)
    first_arrival = _first_time(arrival_hits, draw.times)

    if refine:
        fine = np.minimum(_first_time(grid_hits, grid), first_arrival)
        coarse = np.minimum(_first_time(grid_hits[:, ::2], grid[::2]), first_arrival)
        return SurplusBatch(draw=draw, first_entrance=coarse, first_entrance_fine=fine,
                            grid_step=config.horizon / coarse_cells)

    first = np.minimum(_first_time(grid_hits, grid), first_arrival)
    return SurplusBatch(draw=draw, first_entrance=first, grid_step=config.horizon / coarse_cells)


def simulate_surplus(config: RiskConfig, claims: ClaimModel, arrivals: ArrivalModel,
                     rng: np.random.Generator, x: float) -> PathRecord:
    """
    One surplus path at capital x.

    Returns:
        PathRecord with first_entrance set when U enters L (None otherwise)
    """
    batch = simulate_surplus_batch(config, claims, arrivals, x, rng, 1)
    draw = batch.draw
    k = int(draw.counts[0])
    entrance = float(batch.first_entrance[0])
    return PathRecord(
        D=draw.aggregate()[0],
        arrivals_used=k,
        jump_flags=np.zeros(0, dtype=bool),
        times=draw.times[0, :k],
        claims=draw.claims[0, :k],
        discount=draw.discount[0, :k],
        first_entrance=entrance if math.isfinite(entrance) else None,
    )
