"""
Experiment Config

Parses, validates and serializes the JSON experiment files run by the CLI.

Validation happens in two passes before any computation: the JSON schema
(config/experiment.schema.json, Draft 2020-12) and then the cross-field rules
that a schema cannot express (dimensions agree, an infinite horizon has r > 0
and a moment window, requested estimators fit the target). Every problem is
reported with the dotted path of the field it concerns.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Optional, Union
import json
import logging
import math

from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from arrivals.models import ArrivalModel, arrival_model_from_dict
from claims.claim_model import ClaimModel
from core.errors import ConfigError
from core.settings import PROJECT_ROOT
from estimators.single_jump import weight_grid
from geometry.rare_sets import RareSet, RuinSet, ruin_to_rare
from simulation.risk_config import RiskConfig, make_risk_config

logger = logging.getLogger(__name__)

SCHEMA_PATH = PROJECT_ROOT / "config" / "experiment.schema.json"
SCHEMA_VERSION = 1
ENTRANCE_ESTIMATORS = ("crude", "conditional", "decomposition")
RUIN_ESTIMATORS = ("ruin", "ruin-unperturbed")


@lru_cache(maxsize=1)
def load_schema() -> Dict:
    with open(SCHEMA_PATH, 'r') as f:
        return json.load(f)


def schema_problems(payload: Any) -> List[str]:
    """
    Schema violations as "dotted.path: message" strings, sorted by path.

    For oneOf/anyOf failures the most relevant sub-error is reported, so the path
    points at the field inside the chosen branch (e.g. claims.radial.alpha).
    """
    validator = Draft202012Validator(load_schema())
    problems = []
    for error in validator.iter_errors(payload):
        detail = best_match([error])
        path = ".".join(str(part) for part in detail.absolute_path) or "<root>"
        problems.append(f"{path}: {detail.message}")
    return sorted(set(problems))


@dataclass
class Truncation:
    """Arrival-count truncation of an infinite horizon and the moment window (q1, q2)"""

    count: Optional[int] = None
    q1: Optional[float] = None
    q2: Optional[float] = None

    def to_dict(self) -> Dict:
        data: Dict[str, Any] = {}
        if self.count is not None:
            data['count'] = self.count
        if self.q1 is not None:
            data['q1'] = self.q1
        if self.q2 is not None:
            data['q2'] = self.q2
        return data


@dataclass
class EntranceTarget:
    """Entrance of D(T) into xA"""

    rare_set: RareSet
    kind: ClassVar[str] = "entrance"

    @property
    def dim(self) -> int:
        return self.rare_set.dim

    def entrance_set(self) -> RareSet:
        return self.rare_set

    def to_dict(self) -> Dict:
        return {'kind': self.kind, 'set': self.rare_set.to_dict()}


@dataclass
class RuinTarget:
    """Ruin of the perturbed surplus, scored through A = l - L"""

    ruin_set: str
    allocation: List[float]
    premiums: List[Dict] = field(default_factory=list)
    diffusion: Optional[List[float]] = None
    correlation: Optional[List[List[float]]] = None
    grid_step: float = 0.05
    kind: ClassVar[str] = "ruin"

    @property
    def dim(self) -> int:
        return len(self.allocation)

    def entrance_set(self) -> RareSet:
        return ruin_to_rare(RuinSet(kind=self.ruin_set, dim=self.dim), self.allocation)

    def risk_config(self, r: float, horizon: float, truncation: Optional[int] = None,
                    unperturbed: bool = False) -> RiskConfig:
        """RiskConfig of this target; unperturbed drops premiums and diffusion"""
        return make_risk_config(
            r=r,
            horizon=horizon,
            allocation=self.allocation,
            ruin_kind=self.ruin_set,
            premiums=() if unperturbed else self.premiums,
            diffusion=None if unperturbed else self.diffusion,
            correlation=None if unperturbed else self.correlation,
            grid_step=self.grid_step,
            truncation=truncation,
        )

    def to_dict(self) -> Dict:
        data: Dict[str, Any] = {'kind': self.kind, 'ruin_set': self.ruin_set, 'allocation': self.allocation}
        if self.premiums:
            data['premiums'] = self.premiums
        if self.diffusion is not None:
            data['diffusion'] = self.diffusion
        if self.correlation is not None:
            data['correlation'] = self.correlation
        data['grid_step'] = self.grid_step
        return data


Target = Union[EntranceTarget, RuinTarget]


@dataclass
class SingleJumpGrid:
    """Weight grid [a, b]^n for the weighted-sum comparison"""

    n: int
    a: float
    b: float
    points: int

    def weights(self) -> List[List[float]]:
        return weight_grid(self.n, self.a, self.b, self.points)

    def to_dict(self) -> Dict:
        return {'n': self.n, 'a': self.a, 'b': self.b, 'points': self.points}


@dataclass
class ExperimentConfig:
    """
    One declarative experiment.

    Attributes:
        name: Experiment name
        claims: Claim model
        arrivals: Arrival model
        target: Entrance set or ruin parameters
        r: Interest force
        T: Horizon (math.inf for "inf")
        x_grid: Scales (initial capitals for ruin)
        estimators: Requested estimators, in report order
        n_paths: Paths per estimate
        seed: Master seed
        workers: Worker processes
        truncation: Count and moment window for an infinite horizon
        checks: Optional assembly checks ('factorial_moment', 'refinement')
        single_jump: Weight grid for the 'single-jump' estimator
    """

    name: str
    claims: ClaimModel
    arrivals: ArrivalModel
    target: Target
    r: float
    T: float
    x_grid: List[float]
    estimators: List[str]
    n_paths: int
    seed: int
    workers: int = 1
    truncation: Optional[Truncation] = None
    checks: Dict = field(default_factory=dict)
    single_jump: Optional[SingleJumpGrid] = None
    schema_version: int = SCHEMA_VERSION

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.T)

    @property
    def rare_set(self) -> RareSet:
        return self.target.entrance_set()

    def to_dict(self) -> Dict:
        """Canonical representation; key order and number types are fixed"""
        data: Dict[str, Any] = {
            'schema_version': self.schema_version,
            'name': self.name,
            'claims': self.claims.to_dict(),
            'arrivals': self.arrivals.to_dict(),
            'target': self.target.to_dict(),
            'r': self.r,
            'T': "inf" if self.is_infinite else self.T,
        }
        if self.truncation is not None:
            data['truncation'] = self.truncation.to_dict()
        data.update({
            'x_grid': self.x_grid,
            'estimators': self.estimators,
            'n_paths': self.n_paths,
            'seed': self.seed,
            'workers': self.workers,
        })
        if self.checks:
            data['checks'] = self.checks
        if self.single_jump is not None:
            data['single_jump'] = self.single_jump.to_dict()
        return data


# Building

def _build(problems: List[str], path: str, factory, *args):
    """Run a constructor, recording its ValueError under the given path"""
    try:
        return factory(*args)
    except (ValueError, KeyError, TypeError) as e:
        problems.append(f"{path}: {e}")
        return None


def _floats(values) -> List[float]:
    return [float(v) for v in values]


def _target_from_dict(data: Dict) -> Target:
    if data['kind'] == 'entrance':
        return EntranceTarget(rare_set=RareSet.from_dict(data['set']))
    return RuinTarget(
        ruin_set=data['ruin_set'],
        allocation=_floats(data['allocation']),
        premiums=[_premium(p) for p in data.get('premiums', [])],
        diffusion=_floats(data['diffusion']) if 'diffusion' in data else None,
        correlation=[_floats(row) for row in data['correlation']] if 'correlation' in data else None,
        grid_step=float(data.get('grid_step', 0.05)),
    )


def _premium(data: Dict) -> Dict:
    premium = {'kind': data['kind'], 'M': float(data['M'])}
    if data['kind'] == 'sinusoid':
        premium['period'] = float(data.get('period', 1.0))
    return premium


def _checks(data: Dict) -> Dict:
    checks: Dict[str, Any] = {}
    if 'factorial_moment' in data:
        section = data['factorial_moment']
        checks['factorial_moment'] = {'step': float(section['step']), 'paths': int(section['paths'])}
        if 'horizon' in section:
            checks['factorial_moment']['horizon'] = float(section['horizon'])
    if 'refinement' in data:
        checks['refinement'] = bool(data['refinement'])
    return checks


def _cross_field_problems(config: ExperimentConfig) -> List[str]:
    problems = []
    if config.claims.dim != config.target.dim:
        problems.append(f"target: dimension {config.target.dim} does not match claims dimension {config.claims.dim}")

    if config.is_infinite:
        if not config.r > 0:
            problems.append(f"r: infinite horizon requires r > 0 (got r = {config.r:g})")
        window = config.truncation
        if window is None or window.q1 is None or window.q2 is None:
            problems.append("truncation: infinite horizon requires the moment window q1 and q2")

    ruin_requested = [e for e in config.estimators if e in RUIN_ESTIMATORS]
    if ruin_requested and not isinstance(config.target, RuinTarget):
        problems.append(f"estimators: {', '.join(ruin_requested)} needs a ruin target")
    if "single-jump" in config.estimators and config.single_jump is None:
        problems.append("single_jump: required by the 'single-jump' estimator")
    if config.single_jump is not None and config.single_jump.a > config.single_jump.b:
        problems.append(f"single_jump: need a <= b (got a = {config.single_jump.a:g}, b = {config.single_jump.b:g})")

    if isinstance(config.target, RuinTarget):
        try:
            config.target.risk_config(config.r, config.T, truncation=0 if config.is_infinite else None)
        except ValueError as e:
            problems.append(f"target: {e}")
    return problems


def experiment_from_dict(payload: Any) -> ExperimentConfig:
    """
    Validate a decoded JSON payload and build the ExperimentConfig.

    Raises:
        ConfigError: with every schema or cross-field problem, path-addressed
    """
    problems = schema_problems(payload)
    if problems:
        raise ConfigError(f"experiment config has {len(problems)} schema problem(s)", problems)

    built: List[str] = []
    claims = _build(built, "claims", ClaimModel.from_dict, payload['claims'])
    arrivals = _build(built, "arrivals", arrival_model_from_dict, payload['arrivals'])
    target = _build(built, "target", _target_from_dict, payload['target'])
    if built:
        raise ConfigError(f"experiment config has {len(built)} invalid section(s)", built)

    truncation = None
    if 'truncation' in payload:
        section = payload['truncation']
        truncation = Truncation(
            count=int(section['count']) if 'count' in section else None,
            q1=float(section['q1']) if 'q1' in section else None,
            q2=float(section['q2']) if 'q2' in section else None,
        )
    single_jump = None
    if 'single_jump' in payload:
        section = payload['single_jump']
        single_jump = SingleJumpGrid(n=int(section['n']), a=float(section['a']), b=float(section['b']),
                                     points=int(section['points']))

    config = ExperimentConfig(
        name=payload['name'],
        claims=claims,
        arrivals=arrivals,
        target=target,
        r=float(payload['r']),
        T=math.inf if payload['T'] == "inf" else float(payload['T']),
        x_grid=_floats(payload['x_grid']),
        estimators=list(payload['estimators']),
        n_paths=int(payload['n_paths']),
        seed=int(payload['seed']),
        workers=int(payload.get('workers', 1)),
        truncation=truncation,
        checks=_checks(payload.get('checks', {})),
        single_jump=single_jump,
    )

    problems = _cross_field_problems(config)
    if problems:
        raise ConfigError(f"experiment config has {len(problems)} inconsistent field(s)", problems)
    return config


def parse_experiment(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse experiment JSON text"""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        message = f"{source}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
        raise ConfigError(message)
    return experiment_from_dict(payload)


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    """Read and parse an experiment file"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"experiment file not found: {path}")
    logger.debug("Loading experiment from %s", path)
    return parse_experiment(path.read_text(), source=str(path))


def serialize_experiment(config: ExperimentConfig) -> str:
    """Canonical JSON text: two-space indent, fixed key order, trailing newline"""
    return json.dumps(config.to_dict(), indent=2) + "\n"
