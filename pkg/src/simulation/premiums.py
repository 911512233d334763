"""
Premium densities c_i(s) with explicit upper bounds M_i and closed-form
discounted integrals int_0^t exp(-r s) c_i(s) ds.
"""

from dataclasses import dataclass
from typing import Dict
import math

import numpy as np

PREMIUM_KINDS = ("constant", "sinusoid")


@dataclass(frozen=True)
class PremiumDensity:
    """
    Bounded premium density of one business line.

    Attributes:
        kind: 'constant' (c(s) = M) or 'sinusoid' (c(s) = M/2 (1 + sin(2 pi s / period)))
        bound: Upper bound M >= 0
        period: Sinusoid period
    """

    kind: str = "constant"
    bound: float = 0.0
    period: float = 1.0

    def __post_init__(self):
        if self.kind not in PREMIUM_KINDS:
            raise ValueError(f"Unknown premium kind: {self.kind!r} (expected one of {PREMIUM_KINDS})")
        if not self.bound >= 0:
            raise ValueError(f"premium bound M must be >= 0, got {self.bound!r}")
        if not self.period > 0:
            raise ValueError(f"premium period must be positive, got {self.period!r}")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi / self.period

    def rate(self, s):
        """c(s), always within [0, M]"""
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.full_like(s, self.bound)
        return 0.5 * self.bound * (1.0 + np.sin(self.omega * s))

    def discounted_integral(self, t, r: float):
        """int_0^t exp(-r s) c(s) ds for t >= 0 (array-friendly, t may be inf when r > 0)"""
        t = np.asarray(t, dtype=float)
        if self.bound == 0:
            return np.zeros_like(t)

        if r == 0:
            flat = t
        else:
            flat = -np.expm1(-r * t) / r
        if self.kind == "constant":
            return self.bound * flat

        omega = self.omega
        if r == 0:
            wave = (1.0 - np.cos(omega * t)) / omega
        else:
            finite = np.isfinite(t)
            safe = np.where(finite, t, 0.0)
            decay = np.where(finite, np.exp(-r * safe), 0.0)
            wave = (omega - decay * (r * np.sin(omega * safe) + omega * np.cos(omega * safe))) / (r * r + omega * omega)
        return 0.5 * self.bound * (flat + wave)

    def to_dict(self) -> Dict:
        if self.kind == "constant":
            return {'kind': 'constant', 'M': self.bound}
        return {'kind': 'sinusoid', 'M': self.bound, 'period': self.period}

    @classmethod
    def from_dict(cls, data: Dict) -> "PremiumDensity":
        return cls(kind=data.get('kind', 'constant'), bound=float(data.get('M', 0.0)),
                   period=float(data.get('period', 1.0)))
