"""Shared fixtures for the ruinsim test suite."""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple
import sys

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from arrivals.models import ArrivalBatch, ArrivalModel  # noqa: E402
from claims.claim_model import ClaimModel, Dependence  # noqa: E402
from claims.radial import RadialLaw  # noqa: E402
from claims.spectral import SpectralMeasure  # noqa: E402
from geometry.rare_sets import make_orthant_set, make_sum_set  # noqa: E402

EXPERIMENTS = SRC.parent / "config" / "experiments"


@dataclass(frozen=True)
class DeterministicArrivals(ArrivalModel):
    """Fixed arrival times on every path (test-only model)."""

    times: Tuple[float, ...] = (0.5,)
    kind = "deterministic"

    def sample(self, rng, n_paths, horizon=None, count=None) -> ArrivalBatch:
        self._check_mode(horizon, count)
        times = np.asarray(self.times, dtype=float)
        if horizon is not None:
            times = times[times <= horizon]
        else:
            times = times[:count]
        grid = np.tile(times, (n_paths, 1))
        counts = np.full(n_paths, times.size, dtype=int)
        return ArrivalBatch(times=grid, counts=counts)

    def mean(self, t):
        return float(np.sum(np.asarray(self.times) <= t))

    def laplace_ratio(self, s):
        raise NotImplementedError("deterministic arrivals have no renewal structure")

    def laplace(self, s, i):
        index = np.asarray(i, dtype=int)
        times = np.asarray(self.times, dtype=float)
        return np.exp(-s * times[np.clip(index, 1, times.size) - 1])

    def to_dict(self):
        return {'kind': self.kind, 'times': list(self.times)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pareto_polar():
    """Pareto(2) radial with atoms e1, e2 of weight 1/2 each, iid"""
    return ClaimModel(
        radial=RadialLaw(kind="pareto", alpha=2.0),
        spectral=SpectralMeasure(atoms=[[1.0, 0.0], [0.0, 1.0]], weights=[0.5, 0.5]),
        dependence=Dependence(),
    )


@pytest.fixture
def sum_set():
    return make_sum_set([0.5, 0.5], 1.0)


@pytest.fixture
def orthant_set():
    return make_orthant_set([1.0, 1.0])


@pytest.fixture
def deterministic_arrivals():
    return DeterministicArrivals
