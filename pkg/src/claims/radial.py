"""
Radial Laws

Catalog of heavy-tailed radial distributions for R in X = R * Theta:
Pareto (regularly varying, scale fixed to 1), Weibull with shape k < 1 and
lognormal (both subexponential, rapidly varying).
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Tuple
import math

import numpy as np
from scipy import stats

RADIAL_KINDS = ("pareto", "weibull", "lognormal")


@dataclass(frozen=True)
class RadialLaw:
    """
    Radial part of a polar claim law.

    Attributes:
        kind: 'pareto', 'weibull' or 'lognormal'
        alpha: Pareto index (pareto)
        shape: Weibull shape k in (0, 1) (weibull)
        scale: Weibull scale (weibull)
        mu: Log-mean m (lognormal)
        sigma: Log-standard deviation (lognormal)
    """

    kind: str
    alpha: float = 0.0
    shape: float = 0.0
    scale: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in RADIAL_KINDS:
            raise ValueError(f"Unknown radial kind: {self.kind!r} (expected one of {RADIAL_KINDS})")
        if self.kind == "pareto" and not self.alpha > 0:
            raise ValueError(f"Pareto alpha must be positive, got {self.alpha!r}")
        if self.kind == "weibull":
            if not 0 < self.shape < 1:
                raise ValueError(f"Weibull shape must lie in (0, 1) for a heavy tail, got {self.shape!r}")
            if not self.scale > 0:
                raise ValueError(f"Weibull scale must be positive, got {self.scale!r}")
        if self.kind == "lognormal" and not self.sigma > 0:
            raise ValueError(f"Lognormal sigma must be positive, got {self.sigma!r}")

    @cached_property
    def dist(self):
        """Frozen scipy distribution"""
        if self.kind == "pareto":
            return stats.pareto(b=self.alpha)
        if self.kind == "weibull":
            return stats.weibull_min(c=self.shape, scale=self.scale)
        return stats.lognorm(s=self.sigma, scale=math.exp(self.mu))

    @property
    def is_regularly_varying(self) -> bool:
        return self.kind == "pareto"

    @property
    def lower_endpoint(self) -> float:
        return 1.0 if self.kind == "pareto" else 0.0

    def sf(self, y):
        """P(R > y)"""
        return self.dist.sf(y)

    def pdf(self, y):
        return self.dist.pdf(y)

    def isf(self, v):
        """Inverse survival function, v in (0, 1]"""
        return self.dist.isf(v)

    def mean(self) -> float:
        if self.kind == "pareto" and self.alpha <= 1:
            return math.inf
        return float(self.dist.mean())

    def matuszewska_bounds(self) -> Tuple[float, float]:
        """
        Matuszewska indices (J-, J+) of the radial tail.

        Pareto(alpha) is regularly varying with J- = J+ = alpha; the Weibull and
        lognormal tails are rapidly varying and both indices are infinite.
        """
        if self.kind == "pareto":
            return (float(self.alpha), float(self.alpha))
        return (math.inf, math.inf)

    def to_dict(self) -> Dict:
        if self.kind == "pareto":
            return {'kind': 'pareto', 'alpha': self.alpha}
        if self.kind == "weibull":
            return {'kind': 'weibull', 'shape': self.shape, 'scale': self.scale}
        return {'kind': 'lognormal', 'mu': self.mu, 'sigma': self.sigma}

    @classmethod
    def from_dict(cls, data: Dict) -> "RadialLaw":
        kind = data.get('kind')
        if kind == 'pareto':
            return cls(kind='pareto', alpha=float(data['alpha']))
        if kind == 'weibull':
            return cls(kind='weibull', shape=float(data['shape']), scale=float(data.get('scale', 1.0)))
        if kind == 'lognormal':
            return cls(kind='lognormal', mu=float(data.get('mu', 0.0)), sigma=float(data['sigma']))
        raise ValueError(f"Unknown radial kind: {kind!r}")


def sample_radial(law: RadialLaw, uniforms: np.ndarray) -> np.ndarray:
    """
    Map survival-scale uniforms v in (0, 1] to radial draws R = F_R^{-1}(1 - v).

    Working on the survival scale keeps the far tail accurate.
    """
    return law.isf(uniforms)
