"""
Rare Sets

A set A in the rare-set family is represented by a finite direction set I_A:

    A = { z : max_{p in I_A} p'z > 1 }

Every direction is non-negative and non-zero, so A is open, increasing, has a
convex complement and keeps the origin out of its closure. Scaling is always
done through a separate scale argument: z in xA  <=>  X_A(z) > x.

Ruin sets L (sum-negative, any-component-negative) are cones mapped onto rare
sets through A = l - L.
"""

from dataclasses import dataclass, field
from typing import Dict, Sequence, Union
import logging

import numpy as np

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-12

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class RareSet:
    """
    Polyhedral member of the rare-set family, normalized at level 1.

    Attributes:
        directions: (k, d) array, each row p >= 0 with p != 0
        label: Free text
        kind: 'sum', 'orthant' or 'polyhedral' (serialization only)
        params: Constructor parameters for the given kind
    """

    directions: np.ndarray
    label: str = ""
    kind: str = "polyhedral"
    params: Dict = field(default_factory=dict)

    def __post_init__(self):
        directions = np.array(self.directions, dtype=float, ndmin=2)
        if directions.ndim != 2 or directions.shape[0] == 0 or directions.shape[1] == 0:
            raise ValueError("directions must be a non-empty list of d-dimensional vectors")
        if not np.all(np.isfinite(directions)):
            raise ValueError("directions must be finite")
        if np.any(directions < 0):
            raise ValueError("every direction must be non-negative componentwise")
        if np.any(directions.sum(axis=1) <= 0):
            raise ValueError("every direction needs at least one strictly positive entry")

        directions.setflags(write=False)
        object.__setattr__(self, 'directions', directions)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def functional(self, x: ArrayLike) -> np.ndarray:
        return functional_XA(self, x)

    def contains(self, z: ArrayLike, scale: float) -> Union[bool, np.ndarray]:
        return contains(self, z, scale)

    def to_dict(self) -> Dict:
        """Config representation ({"kind": ..., parameters})"""
        if self.kind == "sum":
            return {'kind': 'sum', 'weights': list(self.params['weights']), 'c': self.params['c']}
        if self.kind == "orthant":
            return {'kind': 'orthant', 'thresholds': list(self.params['thresholds'])}
        data = {'kind': 'polyhedral', 'directions': self.directions.tolist()}
        if self.label and self.label != "polyhedral":
            data['label'] = self.label
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "RareSet":
        kind = data.get('kind')
        if kind == 'sum':
            return make_sum_set(data['weights'], data['c'])
        if kind == 'orthant':
            return make_orthant_set(data['thresholds'])
        if kind == 'polyhedral':
            return make_polyhedral_set(data['directions'], label=data.get('label', ''))
        raise ValueError(f"Unknown rare set kind: {kind!r}")

    def __repr__(self) -> str:
        return f"RareSet(kind={self.kind!r}, dim={self.dim}, directions={self.directions.tolist()})"


def make_sum_set(l: ArrayLike, c: float) -> RareSet:
    """
    A1 = { z : sum_i l_i z_i > c }, stored as the single direction l / c.

    Args:
        l: Non-negative weights summing to 1
        c: Positive threshold

    Returns:
        RareSet
    """
    weights = np.asarray(l, dtype=float).ravel()
    if weights.size == 0 or np.any(weights < 0):
        raise ValueError("weights must be non-negative")
    if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
        raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
    if not c > 0:
        raise ValueError(f"c must be positive, got {c!r}")

    return RareSet(
        directions=weights[None, :] / float(c),
        label=f"A1(l={weights.tolist()}, c={c})",
        kind="sum",
        params={'weights': weights.tolist(), 'c': float(c)},
    )


def make_orthant_set(c: ArrayLike) -> RareSet:
    """
    A2 = { z : z_i > c_i for some i }, stored as directions e_i / c_i.

    Args:
        c: Positive per-component thresholds

    Returns:
        RareSet
    """
    thresholds = np.asarray(c, dtype=float).ravel()
    if thresholds.size == 0:
        raise ValueError("thresholds must be non-empty")
    if np.any(thresholds <= 0):
        raise ValueError(f"every threshold must be positive, got {thresholds.tolist()}")

    return RareSet(
        directions=np.diag(1.0 / thresholds),
        label=f"A2(c={thresholds.tolist()})",
        kind="orthant",
        params={'thresholds': thresholds.tolist()},
    )


def make_polyhedral_set(directions: Sequence[Sequence[float]], label: str = "") -> RareSet:
    """General finite direction set"""
    return RareSet(directions=np.asarray(directions, dtype=float), label=label or "polyhedral", kind="polyhedral")


def functional_XA(rare_set: RareSet, x: ArrayLike) -> np.ndarray:
    """
    X_A(x) = max over directions p of p'x.

    Accepts a single vector (d,) or a stack (..., d). Negative entries are
    allowed (net losses of a perturbed surplus), the value is then the same
    max-of-linear form.

    Args:
        rare_set: The set A
        x: Vector(s) with last axis of size d

    Returns:
        Scalar for one vector, array of shape x.shape[:-1] otherwise
    """
    values = np.asarray(x, dtype=float)
    if values.shape[-1:] != (rare_set.dim,):
        raise ValueError(f"dimension mismatch: set has d={rare_set.dim}, vector has shape {values.shape}")

    result = np.max(values @ rare_set.directions.T, axis=-1)
    if result.ndim == 0:
        return float(result)
    return result


def contains(rare_set: RareSet, z: ArrayLike, scale: float) -> Union[bool, np.ndarray]:
    """
    Membership z in scale * A, i.e. X_A(z) > scale (strict, A is open).

    Args:
        rare_set: The set A
        z: Vector(s) with last axis of size d
        scale: Positive scale

    Returns:
        bool for one vector, boolean array for a stack
    """
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    return functional_XA(rare_set, z) > scale


RUIN_KINDS = {
    'sum-negative': 'sum-negative',
    'L1': 'sum-negative',
    'any-component-negative': 'any-component-negative',
    'L2': 'any-component-negative',
}


@dataclass(frozen=True)
class RuinSet:
    """
    Ruin cone L.

    sum-negative (L1):           { z : sum_i z_i < 0 }
    any-component-negative (L2): { z : z_i < 0 for some i }

    Both are open, decreasing, have 0 on the boundary, a convex complement and
    satisfy xL = L for x > 0.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in RUIN_KINDS:
            raise ValueError(f"Unknown ruin set kind: {self.kind!r}")
        object.__setattr__(self, 'kind', RUIN_KINDS[self.kind])
        if int(self.dim) < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, 'dim', int(self.dim))

    @property
    def short_name(self) -> str:
        return "L1" if self.kind == 'sum-negative' else "L2"

    def contains(self, u: ArrayLike) -> Union[bool, np.ndarray]:
        """Membership of surplus vector(s) u (last axis of size d)"""
        values = np.asarray(u, dtype=float)
        if values.shape[-1:] != (self.dim,):
            raise ValueError(f"dimension mismatch: ruin set has d={self.dim}, vector has shape {values.shape}")

        if self.kind == 'sum-negative':
            inside = values.sum(axis=-1) < 0
        else:
            inside = np.any(values < 0, axis=-1)

        if np.ndim(inside) == 0:
            return bool(inside)
        return inside


def ruin_to_rare(ruin_set: RuinSet, l: ArrayLike) -> RareSet:
    """
    Rare set A = l - L, so that U in L at capital x <=> (x l - U) in xA.

    sum-negative maps to { z : sum_i z_i > 1 } (directions {(1, ..., 1)});
    any-component-negative maps to A2 with thresholds c_i = l_i.

    Args:
        ruin_set: The ruin cone L
        l: Capital allocation, l_i > 0, sum 1

    Returns:
        RareSet
    """
    allocation = np.asarray(l, dtype=float).ravel()
    if allocation.size != ruin_set.dim:
        raise ValueError(f"allocation has {allocation.size} entries, ruin set has d={ruin_set.dim}")
    if np.any(allocation <= 0) or abs(allocation.sum() - 1.0) > WEIGHT_TOLERANCE:
        raise ValueError(f"allocation must be a strictly positive probability vector, got {allocation.tolist()}")

    if ruin_set.kind == 'any-component-negative':
        return make_orthant_set(allocation)

    d = ruin_set.dim
    # sum_i (x l_i - loss_i) < 0  <=>  sum_i loss_i > x
    return make_sum_set(np.full(d, 1.0 / d), 1.0 / d)
