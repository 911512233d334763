"""
Risk Configuration

Parameters of the perturbed surplus model

    U(t) = x l + int_0^t exp(-r s) c(s) ds + delta (.) int_0^t exp(-r s) dB(s) - D(t)

for a d-dimensional business with capital allocation l, bounded premium
densities c_i, diffusion coefficients delta_i and a correlated Brownian motion B.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple
import math

import numpy as np

from geometry.rare_sets import RareSet, RuinSet, WEIGHT_TOLERANCE, ruin_to_rare
from .premiums import PremiumDensity

EIGEN_TOLERANCE = 1e-12


def discount_clock(t, r: float):
    """v(t) = int_0^t exp(-2 r s) ds, the variance clock of int_0^t exp(-r s) dB(s)"""
    t = np.asarray(t, dtype=float)
    if r == 0:
        return t
    return -np.expm1(-2.0 * r * t) / (2.0 * r)


@dataclass(frozen=True, eq=False)
class RiskConfig:
    """
    Surplus-model parameters.

    Attributes:
        r: Interest force (>= 0; > 0 for an infinite horizon)
        horizon: Finite T or math.inf
        allocation: Capital allocation l, l_i > 0, sum 1
        ruin_set: Ruin cone L
        premiums: One premium density per component (empty means no premiums)
        diffusion: delta_i >= 0 (None means no diffusion)
        correlation: Brownian correlation matrix (None means independent components)
        grid_step: Grid step h for diffusion detection
        truncation: Arrival count M used when the horizon is infinite
    """

    r: float
    horizon: float
    allocation: np.ndarray
    ruin_set: RuinSet
    premiums: Tuple[PremiumDensity, ...] = ()
    diffusion: Optional[np.ndarray] = None
    correlation: Optional[np.ndarray] = None
    grid_step: float = 0.05
    truncation: Optional[int] = None

    def __post_init__(self):
        allocation = np.asarray(self.allocation, dtype=float).ravel()
        d = allocation.size
        if d != self.ruin_set.dim:
            raise ValueError(f"allocation has {d} entries, ruin set has d={self.ruin_set.dim}")
        if np.any(allocation <= 0) or abs(allocation.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError(f"allocation must be a strictly positive probability vector, got {allocation.tolist()}")

        if not self.r >= 0:
            raise ValueError(f"r must be >= 0, got {self.r!r}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon!r}")
        if math.isinf(self.horizon):
            if not self.r > 0:
                raise ValueError("an infinite horizon requires r > 0")
            if self.truncation is None or self.truncation < 0:
                raise ValueError("an infinite horizon requires a truncation count M >= 0")
        if not self.grid_step > 0:
            raise ValueError(f"grid step h must be positive, got {self.grid_step!r}")

        premiums = tuple(self.premiums) or tuple(PremiumDensity() for _ in range(d))
        if len(premiums) != d:
            raise ValueError(f"need one premium density per component, got {len(premiums)} for d={d}")

        diffusion = np.zeros(d) if self.diffusion is None else np.asarray(self.diffusion, dtype=float).ravel()
        if diffusion.size != d or np.any(diffusion < 0):
            raise ValueError(f"diffusion must be {d} non-negative coefficients, got {diffusion.tolist()}")
        if math.isinf(self.horizon) and np.any(diffusion > 0):
            raise ValueError("infinite-horizon ruin is supported without diffusion only (delta = 0)")

        correlation = np.eye(d) if self.correlation is None else np.asarray(self.correlation, dtype=float)
        _check_correlation(correlation, d)

        for name, value in (('allocation', allocation), ('diffusion', diffusion), ('correlation', correlation)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'premiums', premiums)

    @property
    def dim(self) -> int:
        return self.allocation.size

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.horizon)

    @property
    def is_diffusive(self) -> bool:
        return bool(np.any(self.diffusion > 0))

    @property
    def premium_bounds(self) -> np.ndarray:
        return np.array([p.bound for p in self.premiums])

    @cached_property
    def brownian_factor(self) -> np.ndarray:
        """F with F F' = correlation, from the eigendecomposition (semidefinite allowed)"""
        values, vectors = np.linalg.eigh(self.correlation)
        return vectors * np.sqrt(np.maximum(values, 0.0))

    def rare_set(self) -> RareSet:
        """A = l - L"""
        return ruin_to_rare(self.ruin_set, self.allocation)

    def premium_integral(self, t) -> np.ndarray:
        """Discounted premium income up to t, shape t.shape + (d,)"""
        t = np.asarray(t, dtype=float)
        return np.stack([p.discounted_integral(t, self.r) for p in self.premiums], axis=-1)

    def to_dict(self) -> Dict:
        return {
            'ruin_set': self.ruin_set.short_name,
            'allocation': self.allocation.tolist(),
            'premiums': [p.to_dict() for p in self.premiums],
            'diffusion': self.diffusion.tolist(),
            'correlation': self.correlation.tolist(),
            'grid_step': self.grid_step,
        }


def _check_correlation(correlation: np.ndarray, d: int):
    if correlation.shape != (d, d):
        raise ValueError(f"correlation must be {d}x{d}, got shape {correlation.shape}")
    if not np.allclose(correlation, correlation.T, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(correlation), 1.0, atol=1e-12):
        raise ValueError("correlation matrix must have a unit diagonal")
    smallest = float(np.linalg.eigvalsh(correlation).min())
    if smallest < -EIGEN_TOLERANCE:
        raise ValueError(f"correlation matrix is not positive semidefinite (smallest eigenvalue {smallest:.3g})")


def make_risk_config(r: float, horizon: float, allocation: Sequence[float], ruin_kind: str,
                     premiums: Sequence[Dict] = (), diffusion: Optional[Sequence[float]] = None,
                     correlation: Optional[Sequence[Sequence[float]]] = None, grid_step: float = 0.05,
                     truncation: Optional[int] = None) -> RiskConfig:
    """Build a RiskConfig from config-style values"""
    d = len(allocation)
    return RiskConfig(
        r=float(r),
        horizon=float(horizon),
        allocation=np.asarray(allocation, dtype=float),
        ruin_set=RuinSet(kind=ruin_kind, dim=d),
        premiums=tuple(PremiumDensity.from_dict(p) for p in premiums),
        diffusion=None if diffusion is None else np.asarray(diffusion, dtype=float),
        correlation=None if correlation is None else np.asarray(correlation, dtype=float),
        grid_step=float(grid_step),
        truncation=truncation,
    )
