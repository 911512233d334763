"""
Claim Model

Polar claim vectors X = R * Theta with a temporal dependence structure on the
radial sequence, plus exact oracles for the polar-discrete family:

    F_A tail:  P(X in xA) = sum_j w_j P(R > x / (theta_j)_A)
    mu(A)   =  sum_j w_j (theta_j)_A^alpha            (Pareto radial only)

Dependence is either iid or a stationary Gaussian AR(1) copula on the radial
uniforms; angular parts are always independent draws from the spectral measure,
so the marginal law of each claim does not depend on rho.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple, Union
import logging
import math

import numpy as np
from scipy import stats

from geometry.rare_sets import RareSet, functional_XA
from .radial import RadialLaw, sample_radial
from .spectral import SpectralMeasure

logger = logging.getLogger(__name__)

DEPENDENCE_KINDS = ("iid", "ar1")


@dataclass(frozen=True)
class Dependence:
    """
    Temporal dependence of the radial sequence.

    Attributes:
        kind: 'iid' or 'ar1' (Gaussian copula with lag-1 correlation rho)
        rho: Lag-1 latent correlation in [0, 1)
    """

    kind: str = "iid"
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in DEPENDENCE_KINDS:
            raise ValueError(f"Unknown dependence kind: {self.kind!r}")
        if self.kind == "ar1" and not 0 <= self.rho < 1:
            raise ValueError(f"AR(1) copula rho must lie in [0, 1), got {self.rho!r}")

    def to_dict(self) -> Dict:
        if self.kind == "iid":
            return {'kind': 'iid'}
        return {'kind': 'ar1', 'rho': self.rho}

    @classmethod
    def from_dict(cls, data: Dict) -> "Dependence":
        return cls(kind=data.get('kind', 'iid'), rho=float(data.get('rho', 0.0)))


@dataclass(frozen=True)
class ClaimModel:
    """
    Polar claim law with temporal dependence.

    Attributes:
        radial: Radial law of R
        spectral: Discrete spectral measure of Theta
        dependence: Dependence across claim indices
    """

    radial: RadialLaw
    spectral: SpectralMeasure
    dependence: Dependence = field(default_factory=Dependence)

    @property
    def dim(self) -> int:
        return self.spectral.dim

    @property
    def is_iid(self) -> bool:
        """Independent claims (an AR(1) copula with rho=0 counts as independent)"""
        return self.dependence.kind == "iid" or self.dependence.rho == 0.0

    # Sampling

    def sample_paths(self, rng: np.random.Generator, n_paths: int, length: int) -> np.ndarray:
        """
        Draw n_paths independent claim sequences of the given length.

        Args:
            rng: Random generator
            n_paths: Number of sequences
            length: Claims per sequence

        Returns:
            Array of shape (n_paths, length, d)
        """
        if length == 0:
            return np.zeros((n_paths, 0, self.dim))

        atom_index = self.spectral.sample_indices(rng, (n_paths, length))
        survival = self._radial_survival_uniforms(rng, n_paths, length)
        radii = sample_radial(self.radial, survival)

        return radii[..., None] * self.spectral.atoms[atom_index]

    def _radial_survival_uniforms(self, rng: np.random.Generator, n_paths: int, length: int) -> np.ndarray:
        if self.dependence.kind == "iid":
            # 1 - U lies in (0, 1], so isf never sees 0
            return 1.0 - rng.random((n_paths, length))

        rho = self.dependence.rho
        innovations = rng.standard_normal((n_paths, length))
        latent = np.empty_like(innovations)
        latent[:, 0] = innovations[:, 0]
        scale = math.sqrt(1.0 - rho * rho)
        for i in range(1, length):
            latent[:, i] = rho * latent[:, i - 1] + scale * innovations[:, i]
        return stats.norm.sf(latent)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """One dependent sequence of n claims, shape (n, d)"""
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        return self.sample_paths(rng, 1, n)[0]

    # Oracles

    def atom_levels(self, rare_set: RareSet) -> np.ndarray:
        """(theta_j)_A for every atom"""
        if rare_set.dim != self.dim:
            raise ValueError(f"dimension mismatch: model d={self.dim}, set d={rare_set.dim}")
        return functional_XA(rare_set, self.spectral.atoms)

    def reaches(self, rare_set: RareSet) -> bool:
        return bool(np.any(self.atom_levels(rare_set) > 0))

    def tail(self, rare_set: RareSet, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """
        Exact P(X in xA) = sum_j w_j P(R > x / (theta_j)_A).

        Args:
            rare_set: The set A
            x: Positive scale(s)

        Returns:
            Probability (array if x is an array)
        """
        scales = np.asarray(x, dtype=float)
        if np.any(scales <= 0):
            raise ValueError("x must be positive")

        levels = self.atom_levels(rare_set)
        reachable = levels > 0
        if not np.any(reachable):
            logger.warning("Set %s is unreachable under this spectral measure; tail is 0", rare_set.label)
            return 0.0 if scales.ndim == 0 else np.zeros_like(scales)

        weights = self.spectral.weights[reachable]
        thresholds = scales[..., None] / levels[reachable]
        value = np.sum(weights * self.radial.sf(thresholds), axis=-1)
        if np.ndim(value) == 0:
            return float(value)
        return value

    def mu(self, rare_set: RareSet) -> float:
        """Limit-measure mass mu(A) = sum_j w_j (theta_j)_A^alpha (Pareto radial only)"""
        if not self.radial.is_regularly_varying:
            raise ValueError(f"mu(A) is defined for MRV claims only, radial kind is {self.radial.kind!r}")
        levels = self.atom_levels(rare_set)
        return float(np.sum(self.spectral.weights * levels ** self.radial.alpha))

    def pure_power_threshold(self, rare_set: RareSet) -> float:
        """Smallest x from which tail(A, x) = mu(A) x^-alpha exactly (Pareto radial)"""
        if not self.radial.is_regularly_varying:
            return math.inf
        return float(np.max(self.atom_levels(rare_set)))

    def is_pure_power(self, rare_set: RareSet, x: float) -> bool:
        return x >= self.pure_power_threshold(rare_set)

    def matuszewska_bounds(self) -> Tuple[float, float]:
        """(J-, J+) of F_A; for polar laws these are the radial indices for every reachable A"""
        return self.radial.matuszewska_bounds()

    # Serialization

    def to_dict(self) -> Dict:
        return {
            'radial': self.radial.to_dict(),
            'spectral': self.spectral.to_dict(),
            'dependence': self.dependence.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ClaimModel":
        return cls(
            radial=RadialLaw.from_dict(data['radial']),
            spectral=SpectralMeasure.from_dict(data['spectral']),
            dependence=Dependence.from_dict(data.get('dependence', {'kind': 'iid'})),
        )


def sample_claims(model: ClaimModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """n claim vectors of one dependent sequence, shape (n, d)"""
    return model.sample(n, rng)


def tail_FA(model: ClaimModel, rare_set: RareSet, x: float) -> float:
    """Exact entrance probability P(X in xA)"""
    return model.tail(rare_set, x)


def mu_of_set(model: ClaimModel, rare_set: RareSet) -> float:
    """Limit-measure mass mu(A)"""
    return model.mu(rare_set)


def matuszewska_bounds(model: ClaimModel) -> Tuple[float, float]:
    """Analytic Matuszewska indices (J-, J+) of F_A; math.inf marks an unbounded index"""
    return model.matuszewska_bounds()
