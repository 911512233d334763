"""
Arrival Models

Counting processes N(t) = sup{i : tau_i <= t} with samplable arrival times:

- poisson:               homogeneous Poisson(rate)
- inhom-poisson:         rate(s) = rate0 (1 + beta sin(2 pi s / period)), |beta| < 1, by thinning
- renewal:               iid inter-arrivals (exponential or gamma)
- wlod:                  quasi-renewal, identically distributed but dependent inter-arrivals
                         theta_i = F^{-1}(Phi(G_i)) with a lag-one Gaussian moving average G
                         whose only non-zero correlation is negative
- bounded-below:         theta_i = a + W E_i, one positive mixing W per path, E_i iid exponential

Arrival times come back as an ArrivalBatch: a (paths, k) array padded with +inf
beyond each path's count.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Tuple
import logging
import math

import numpy as np
from scipy import integrate, stats

from core.settings import get_settings

logger = logging.getLogger(__name__)


@dataclass
class ArrivalBatch:
    """
    Arrival times of a batch of paths.

    Attributes:
        times: (n_paths, k) array, increasing along each row, +inf padded
        counts: (n_paths,) number of finite times per row
    """

    times: np.ndarray
    counts: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.times.shape[0]

    @property
    def width(self) -> int:
        return self.times.shape[1]

    @property
    def mask(self) -> np.ndarray:
        return np.isfinite(self.times)

    def row(self, i: int) -> np.ndarray:
        return self.times[i, :self.counts[i]]


def _pad_and_count(times: np.ndarray, horizon: float) -> ArrivalBatch:
    """Blank out times beyond the horizon and trim empty columns"""
    times = np.where(times <= horizon, times, np.inf)
    counts = np.isfinite(times).sum(axis=1)
    width = int(counts.max()) if counts.size else 0
    return ArrivalBatch(times=times[:, :width], counts=counts)


@dataclass(frozen=True)
class InterArrivalLaw:
    """
    Inter-arrival distribution.

    Attributes:
        kind: 'exponential' (rate) or 'gamma' (shape, scale)
        rate: Exponential rate
        shape: Gamma shape
        scale: Gamma scale
    """

    kind: str = "exponential"
    rate: float = 1.0
    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("exponential", "gamma"):
            raise ValueError(f"Unknown inter-arrival kind: {self.kind!r}")
        if self.kind == "exponential" and not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate!r}")
        if self.kind == "gamma" and not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"gamma shape and scale must be positive, got {self.shape!r}, {self.scale!r}")

    @cached_property
    def dist(self):
        if self.kind == "exponential":
            return stats.expon(scale=1.0 / self.rate)
        return stats.gamma(a=self.shape, scale=self.scale)

    @property
    def mean(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.rate
        return self.shape * self.scale

    def laplace(self, s: float) -> float:
        """E[exp(-s theta)]"""
        if self.kind == "exponential":
            return self.rate / (self.rate + s)
        return (1.0 + s * self.scale) ** (-self.shape)

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.rate, size=shape)
        return rng.gamma(self.shape, self.scale, size=shape)

    def to_dict(self) -> Dict:
        if self.kind == "exponential":
            return {'kind': 'exponential', 'rate': self.rate}
        return {'kind': 'gamma', 'shape': self.shape, 'scale': self.scale}

    @classmethod
    def from_dict(cls, data: Dict) -> "InterArrivalLaw":
        if data.get('kind') == 'gamma':
            return cls(kind='gamma', shape=float(data['shape']), scale=float(data.get('scale', 1.0)))
        return cls(kind='exponential', rate=float(data.get('rate', 1.0)))


class ArrivalModel(ABC):
    """Common interface of every arrival kind"""

    kind: str = ""

    # True when mean() and density() are closed-form
    is_analytic: bool = False

    # True when laplace() is an upper bound rather than the exact value
    laplace_is_bound: bool = False

    @property
    def earliest_arrival(self) -> float:
        """Almost-sure lower bound on tau_1"""
        return 0.0

    @abstractmethod
    def sample(self, rng: np.random.Generator, n_paths: int,
               horizon: Optional[float] = None, count: Optional[int] = None) -> ArrivalBatch:
        """
        Sample arrival times for n_paths independent paths.

        Args:
            rng: Random generator
            n_paths: Number of paths
            horizon: Keep arrivals in [0, horizon] (finite horizon)
            count: Or keep exactly the first count arrivals (infinite-horizon truncation)

        Returns:
            ArrivalBatch
        """

    def mean(self, t: float) -> float:
        raise NotImplementedError(f"{self.kind} arrivals have no closed-form mean function")

    def density(self, s):
        raise NotImplementedError(f"{self.kind} arrivals have no closed-form mean density")

    def laplace_ratio(self, s: float) -> float:
        """g(s) with E[exp(-s tau_i)] = g(s)^i (or <= when laplace_is_bound)"""
        raise NotImplementedError(f"{self.kind} arrivals have no geometric Laplace form")

    def laplace(self, s: float, i) -> np.ndarray:
        """E[exp(-s tau_i)] for arrival index i >= 1 (array-friendly)"""
        return self.laplace_ratio(s) ** np.asarray(i, dtype=float)

    @property
    def integration_scale(self) -> float:
        """Natural time scale used to chunk infinite-horizon quadrature"""
        return 1.0

    @abstractmethod
    def to_dict(self) -> Dict:
        """Config representation"""

    @staticmethod
    def _check_mode(horizon: Optional[float], count: Optional[int]):
        if (horizon is None) == (count is None):
            raise ValueError("pass exactly one of horizon or count")
        if horizon is not None and not (0 < horizon < math.inf):
            raise ValueError(f"horizon must be positive and finite, got {horizon!r}")
        if count is not None and count < 0:
            raise ValueError(f"count must be >= 0, got {count!r}")


class GapArrivalModel(ArrivalModel):
    """Arrival kinds built from a sequence of inter-arrival times"""

    @abstractmethod
    def _gaps(self, rng: np.random.Generator, n_paths: int, width: int, state):
        """Return (gaps of shape (n_paths, width), state for the next block)"""

    def sample(self, rng, n_paths, horizon=None, count=None) -> ArrivalBatch:
        self._check_mode(horizon, count)

        if count is not None:
            if count == 0:
                return ArrivalBatch(times=np.zeros((n_paths, 0)), counts=np.zeros(n_paths, dtype=int))
            gaps, _ = self._gaps(rng, n_paths, int(count), None)
            times = np.cumsum(gaps, axis=1)
            return ArrivalBatch(times=times, counts=np.full(n_paths, int(count)))

        block = int(get_settings()['simulation']['max_arrivals_block'])
        blocks = []
        state = None
        last = np.zeros(n_paths)
        while True:
            gaps, state = self._gaps(rng, n_paths, block, state)
            times = last[:, None] + np.cumsum(gaps, axis=1)
            blocks.append(times)
            last = times[:, -1]
            if np.all(last > horizon):
                break

        return _pad_and_count(np.concatenate(blocks, axis=1), horizon)


@dataclass(frozen=True)
class PoissonArrivals(GapArrivalModel):
    """Homogeneous Poisson process with rate lambda"""

    rate: float = 1.0
    kind = "poisson"
    is_analytic = True

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate!r}")

    def _gaps(self, rng, n_paths, width, state):
        return rng.exponential(1.0 / self.rate, size=(n_paths, width)), None

    def mean(self, t):
        return self.rate * np.asarray(t, dtype=float)

    def density(self, s):
        return self.rate * np.ones_like(np.asarray(s, dtype=float))

    def laplace_ratio(self, s):
        return self.rate / (self.rate + s)

    @property
    def integration_scale(self):
        return 1.0 / self.rate

    def to_dict(self):
        return {'kind': 'poisson', 'lambda': self.rate}


@dataclass(frozen=True)
class InhomogeneousPoissonArrivals(ArrivalModel):
    """Poisson process with rate rate0 (1 + beta sin(2 pi s / period)), sampled by thinning"""

    rate0: float = 1.0
    beta: float = 0.0
    period: float = 1.0
    kind = "inhom-poisson"
    is_analytic = True
    laplace_is_bound = True

    def __post_init__(self):
        if not self.rate0 > 0:
            raise ValueError(f"lambda0 must be positive, got {self.rate0!r}")
        if not abs(self.beta) < 1:
            raise ValueError(f"|beta| must be < 1, got {self.beta!r}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period!r}")

    @property
    def envelope(self) -> float:
        return self.rate0 * (1.0 + abs(self.beta))

    def density(self, s):
        s = np.asarray(s, dtype=float)
        return self.rate0 * (1.0 + self.beta * np.sin(2.0 * math.pi * s / self.period))

    def mean(self, t):
        t = np.asarray(t, dtype=float)
        omega = 2.0 * math.pi / self.period
        return self.rate0 * (t + self.beta / omega * (1.0 - np.cos(omega * t)))

    def laplace_ratio(self, s):
        # The process is a thinning of Poisson(envelope), so tau_i dominates the envelope's tau_i
        return self.envelope / (self.envelope + s)

    @property
    def integration_scale(self):
        return self.period

    def _thinned_window(self, rng, n_paths, start, length) -> np.ndarray:
        candidates = rng.poisson(self.envelope * length, size=n_paths)
        width = int(candidates.max()) if n_paths else 0
        times = start + length * rng.random((n_paths, width))
        keep = np.arange(width)[None, :] < candidates[:, None]
        accept = rng.random((n_paths, width)) * self.envelope <= self.density(times)
        times = np.where(keep & accept, times, np.inf)
        return np.sort(times, axis=1)

    def sample(self, rng, n_paths, horizon=None, count=None) -> ArrivalBatch:
        self._check_mode(horizon, count)

        if horizon is not None:
            return _pad_and_count(self._thinned_window(rng, n_paths, 0.0, horizon), horizon)

        count = int(count)
        if count == 0:
            return ArrivalBatch(times=np.zeros((n_paths, 0)), counts=np.zeros(n_paths, dtype=int))

        window = max(self.period, count / self.rate0 / 4.0)
        blocks = []
        start = 0.0
        have = np.zeros(n_paths, dtype=int)
        while np.any(have < count):
            block = self._thinned_window(rng, n_paths, start, window)
            blocks.append(block)
            have += np.isfinite(block).sum(axis=1)
            start += window

        times = np.sort(np.concatenate(blocks, axis=1), axis=1)[:, :count]
        return ArrivalBatch(times=times, counts=np.full(n_paths, count))

    def to_dict(self):
        return {'kind': 'inhom-poisson', 'lambda0': self.rate0, 'beta': self.beta, 'period': self.period}


@dataclass(frozen=True)
class RenewalArrivals(GapArrivalModel):
    """Renewal process with iid inter-arrivals"""

    gap: InterArrivalLaw = field(default_factory=InterArrivalLaw)
    kind = "renewal"

    def _gaps(self, rng, n_paths, width, state):
        return self.gap.sample(rng, (n_paths, width)), None

    def laplace_ratio(self, s):
        return self.gap.laplace(s)

    @property
    def integration_scale(self):
        return self.gap.mean

    def to_dict(self):
        return {'kind': 'renewal', 'inter_arrival': self.gap.to_dict()}


@dataclass(frozen=True)
class WLODArrivals(GapArrivalModel):
    """
    Quasi-renewal process with widely lower orthant dependent inter-arrivals.

    theta_i = F^{-1}(Phi(G_i)), G_i = (Z_i + b Z_{i-1}) / sqrt(1 + b^2), b in (-1, 0].
    All latent correlations are <= 0 (lag one: b / (1 + b^2), zero beyond), so by
    Slepian's inequality the lower-orthant inequality holds with g_L(n) = 1 and
    E[exp(-s tau_n)] <= E[exp(-s theta)]^n.
    """

    gap: InterArrivalLaw = field(default_factory=InterArrivalLaw)
    latent_coef: float = -0.5
    kind = "wlod"
    laplace_is_bound = True

    def __post_init__(self):
        if not -1 < self.latent_coef <= 0:
            raise ValueError(f"latent_coef must lie in (-1, 0], got {self.latent_coef!r}")

    @property
    def lag_correlation(self) -> float:
        b = self.latent_coef
        return b / (1.0 + b * b)

    def g_L(self, n: int) -> float:
        """Dominating coefficient of the lower-orthant inequality"""
        return 1.0

    def _gaps(self, rng, n_paths, width, state):
        previous = rng.standard_normal(n_paths) if state is None else state
        innovations = rng.standard_normal((n_paths, width))
        lagged = np.concatenate([previous[:, None], innovations[:, :-1]], axis=1)
        latent = (innovations + self.latent_coef * lagged) / math.sqrt(1.0 + self.latent_coef ** 2)
        gaps = self.gap.dist.isf(stats.norm.sf(latent))
        return gaps, innovations[:, -1]

    def laplace_ratio(self, s):
        return self.gap.laplace(s)

    @property
    def integration_scale(self):
        return self.gap.mean

    def to_dict(self):
        return {'kind': 'wlod', 'inter_arrival': self.gap.to_dict(), 'latent_coef': self.latent_coef}


@dataclass(frozen=True)
class MixingLaw:
    """Positive common mixing variable W: constant or gamma(shape, scale)"""

    kind: str = "constant"
    value: float = 1.0
    shape: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "gamma"):
            raise ValueError(f"Unknown mixing kind: {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError(f"mixing value must be positive, got {self.value!r}")
        if self.kind == "gamma" and not (self.shape > 0 and self.scale > 0):
            raise ValueError("gamma mixing needs positive shape and scale")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.value)
        return rng.gamma(self.shape, self.scale, size=n)

    @property
    def mean(self) -> float:
        return self.value if self.kind == "constant" else self.shape * self.scale

    def to_dict(self) -> Dict:
        if self.kind == "constant":
            return {'kind': 'constant', 'value': self.value}
        return {'kind': 'gamma', 'shape': self.shape, 'scale': self.scale}

    @classmethod
    def from_dict(cls, data: Dict) -> "MixingLaw":
        if data.get('kind') == 'gamma':
            return cls(kind='gamma', shape=float(data['shape']), scale=float(data.get('scale', 1.0)))
        return cls(kind='constant', value=float(data.get('value', 1.0)))


@dataclass(frozen=True)
class BoundedBelowArrivals(GapArrivalModel):
    """
    Arbitrarily dependent inter-arrivals bounded from below by a > 0.

    theta_i = a + W E_i with one mixing W per path and E_i iid Exp(base_rate).
    """

    a: float = 0.1
    mixing: MixingLaw = field(default_factory=MixingLaw)
    base_rate: float = 1.0
    kind = "bounded-below"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a!r}")
        if not self.base_rate > 0:
            raise ValueError(f"base rate must be positive, got {self.base_rate!r}")

    @property
    def earliest_arrival(self):
        return self.a

    def _gaps(self, rng, n_paths, width, state):
        mixing = self.mixing.sample(rng, n_paths) if state is None else state
        exponentials = rng.exponential(1.0 / self.base_rate, size=(n_paths, width))
        return self.a + mixing[:, None] * exponentials, mixing

    def laplace(self, s, i):
        i = np.asarray(i, dtype=float)
        if self.mixing.kind == "constant":
            return self.laplace_ratio(s) ** i

        # E[exp(-s tau_i)] = exp(-s a i) E_W[(rate / (rate + s W))^i]
        density = stats.gamma(a=self.mixing.shape, scale=self.mixing.scale).pdf
        def one(k):
            inner, _ = integrate.quad(lambda w: (self.base_rate / (self.base_rate + s * w)) ** k * density(w), 0, np.inf)
            return math.exp(-s * self.a * k) * inner
        return np.vectorize(one, otypes=[float])(i)

    def laplace_ratio(self, s):
        if self.mixing.kind == "constant":
            return math.exp(-s * self.a) * self.base_rate / (self.base_rate + s * self.mixing.value)
        raise NotImplementedError("gamma-mixed arrivals have no geometric Laplace form; use laplace()")

    @property
    def integration_scale(self):
        return self.a + self.mixing.mean / self.base_rate

    def to_dict(self):
        return {'kind': 'bounded-below', 'a': self.a, 'mixing': self.mixing.to_dict(), 'base_rate': self.base_rate}


ARRIVAL_KINDS = ("poisson", "inhom-poisson", "renewal", "wlod", "bounded-below")


def arrival_model_from_dict(data: Dict) -> ArrivalModel:
    """
    Build an arrival model from its config representation.

    Args:
        data: e.g. {"kind": "poisson", "lambda": 1.0}

    Returns:
        ArrivalModel
    """
    kind = data.get('kind')
    if kind == 'poisson':
        return PoissonArrivals(rate=float(data['lambda']))
    if kind == 'inhom-poisson':
        return InhomogeneousPoissonArrivals(
            rate0=float(data['lambda0']),
            beta=float(data.get('beta', 0.0)),
            period=float(data.get('period', 1.0)),
        )
    if kind == 'renewal':
        return RenewalArrivals(gap=InterArrivalLaw.from_dict(data['inter_arrival']))
    if kind == 'wlod':
        return WLODArrivals(
            gap=InterArrivalLaw.from_dict(data['inter_arrival']),
            latent_coef=float(data.get('latent_coef', -0.5)),
        )
    if kind == 'bounded-below':
        return BoundedBelowArrivals(
            a=float(data['a']),
            mixing=MixingLaw.from_dict(data.get('mixing', {'kind': 'constant', 'value': 1.0})),
            base_rate=float(data.get('base_rate', 1.0)),
        )
    raise ValueError(f"Unknown arrival kind: {kind!r} (expected one of {ARRIVAL_KINDS})")


def sample_arrivals(model: ArrivalModel, rng: np.random.Generator,
                    horizon: Optional[float] = None, count: Optional[int] = None) -> np.ndarray:
    """Increasing arrival times of one path"""
    batch = model.sample(rng, 1, horizon=horizon, count=count)
    return batch.row(0)
