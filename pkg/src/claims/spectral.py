"""
Discrete spectral measure on the non-negative part of the l1 unit sphere.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np

SPHERE_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """
    Atoms theta_j >= 0 with ||theta_j||_1 = 1 and probabilities w_j.

    Attributes:
        atoms: (m, d) array
        weights: (m,) array summing to 1
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float, ndmin=2)
        weights = np.array(self.weights, dtype=float).ravel()

        if atoms.shape[0] == 0 or atoms.shape[0] != weights.size:
            raise ValueError(f"need one weight per atom, got {atoms.shape[0]} atoms and {weights.size} weights")
        if np.any(atoms < 0):
            raise ValueError("atoms must be non-negative")
        norms = atoms.sum(axis=1)
        if np.any(np.abs(norms - 1.0) > SPHERE_TOLERANCE):
            raise ValueError(f"atoms must have unit l1 norm, got norms {norms.tolist()}")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > SPHERE_TOLERANCE:
            raise ValueError(f"weights must be non-negative and sum to 1, got {weights.tolist()}")

        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, 'atoms', atoms)
        object.__setattr__(self, 'weights', weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def sample_indices(self, rng: np.random.Generator, shape) -> np.ndarray:
        """Atom indices drawn with probabilities weights"""
        if self.size == 1:
            return np.zeros(shape, dtype=np.intp)
        return rng.choice(self.size, size=shape, p=self.weights)

    def to_dict(self) -> Dict:
        return {'atoms': self.atoms.tolist(), 'weights': self.weights.tolist()}

    @classmethod
    def from_dict(cls, data: Dict) -> "SpectralMeasure":
        return cls(atoms=np.asarray(data['atoms'], dtype=float), weights=np.asarray(data['weights'], dtype=float))
