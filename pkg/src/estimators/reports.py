"""
Estimator Reports

EstimateReport for a single probability estimate matched against its
asymptotic value; DecompositionReport for the big-jump decomposition of the
entrance event.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging
import math

from asymptotics.rhs import AsymptoticValue
from core.settings import get_settings
from .intervals import normal_interval, proportion_interval, ratio_interval

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    'x', 'estimator', 'estimate', 'stderr', 'asymptotic', 'ratio',
    'ratio_ci_lo', 'ratio_ci_hi', 'n_paths', 'seed',
]


@dataclass
class EstimateReport:
    """
    Monte Carlo estimate with its matched asymptotic value.

    Attributes:
        estimator: Estimator kind
        x: Scale (or initial capital)
        estimate: Point estimate in [0, 1]
        stderr: Standard error
        n_paths: Simulated paths
        seed: Master seed
        ci: Confidence interval for the estimate
        ci_method: 'normal' or 'wilson'
        hits: Number of hits (proportion estimators)
        asymptotic: Matched asymptotic value
        ratio: estimate / asymptotic (only when asymptotic > 0)
        ratio_ci: Delta-method (or Wilson-scaled) interval for the ratio
        remainder_bound: Certified truncation remainder (infinite horizon)
        flags: Warnings raised while estimating
        extra: Estimator-specific diagnostics
    """

    estimator: str
    x: float
    estimate: float
    stderr: float
    n_paths: int
    seed: int
    ci: Tuple[float, float] = (math.nan, math.nan)
    ci_method: str = "normal"
    hits: Optional[int] = None
    asymptotic: Optional[AsymptoticValue] = None
    ratio: Optional[float] = None
    ratio_ci: Optional[Tuple[float, float]] = None
    remainder_bound: Optional[float] = None
    flags: List[str] = field(default_factory=list)
    extra: Dict = field(default_factory=dict)

    def flag(self, message: str):
        logger.warning("%s (x=%g): %s", self.estimator, self.x, message)
        self.flags.append(message)

    def match(self, asymptotic: Optional[AsymptoticValue]):
        """Attach the asymptotic value and the ratio with its interval"""
        self.asymptotic = asymptotic
        if asymptotic is None or not asymptotic.value > 0:
            self.ratio, self.ratio_ci = None, None
            return
        if self.ci_method == "wilson":
            self.ratio = self.estimate / asymptotic.value
            self.ratio_ci = (self.ci[0] / asymptotic.value, self.ci[1] / asymptotic.value)
            return
        ratio, lower, upper = ratio_interval(self.estimate, self.stderr, asymptotic.value, asymptotic.error)
        self.ratio, self.ratio_ci = ratio, (lower, upper)

    def to_row(self) -> Dict:
        return {
            'x': self.x,
            'estimator': self.estimator,
            'estimate': self.estimate,
            'stderr': self.stderr,
            'asymptotic': self.asymptotic.value if self.asymptotic is not None else math.nan,
            'ratio': self.ratio if self.ratio is not None else math.nan,
            'ratio_ci_lo': self.ratio_ci[0] if self.ratio_ci else math.nan,
            'ratio_ci_hi': self.ratio_ci[1] if self.ratio_ci else math.nan,
            'n_paths': self.n_paths,
            'seed': self.seed,
        }


def proportion_report(estimator: str, x: float, hits: int, n_paths: int, seed: int) -> EstimateReport:
    """EstimateReport of a binomial proportion with the rare-hit flag"""
    estimate = hits / n_paths
    stderr = math.sqrt(estimate * (1.0 - estimate) / n_paths)
    interval, method = proportion_interval(hits, n_paths)
    report = EstimateReport(estimator=estimator, x=x, estimate=estimate, stderr=stderr, n_paths=n_paths,
                            seed=seed, ci=interval, ci_method=method, hits=int(hits))
    if hits < int(get_settings()['estimators']['min_hits']):
        report.flag(f"only {hits} hits; the confidence interval is unreliable")
    return report


def mean_report(estimator: str, x: float, total: float, total_sq: float, n_paths: int, seed: int) -> EstimateReport:
    """EstimateReport of a sample mean of values in [0, 1]"""
    estimate = total / n_paths
    variance = max(total_sq / n_paths - estimate ** 2, 0.0)
    stderr = math.sqrt(variance / n_paths)
    return EstimateReport(estimator=estimator, x=x, estimate=estimate, stderr=stderr, n_paths=n_paths,
                          seed=seed, ci=normal_interval(estimate, stderr), ci_method="normal")


@dataclass
class MCValue:
    """Monte Carlo value with its standard error"""

    value: float
    stderr: float

    @classmethod
    def proportion(cls, hits: int, n: int) -> "MCValue":
        p = hits / n
        return cls(value=p, stderr=math.sqrt(p * (1 - p) / n))

    @classmethod
    def mean(cls, total: float, total_sq: float, n: int) -> "MCValue":
        m = total / n
        return cls(value=m, stderr=math.sqrt(max(total_sq / n - m * m, 0.0) / n))


@dataclass
class DecompositionReport:
    """
    Big-jump decomposition of {D in xA}, J_x = number of claims with X_i exp(-r tau_i) in xA.

    Attributes:
        x: Scale
        n_paths: Simulated paths
        seed: Master seed
        jump_at_least_one: P(J >= 1)
        jump_at_least_two: P(J >= 2)
        single_jump: P(J = 1)
        entrance: P(D in xA)
        entrance_without_jump: P(D in xA, J = 0)
        lambda_x: E[J], the Campbell-formula estimate of the asymptotic value
        counts: Raw hit counts behind the proportions
        asymptotic: Matched asymptotic value
        flags: Warnings
    """

    x: float
    n_paths: int
    seed: int
    jump_at_least_one: MCValue
    jump_at_least_two: MCValue
    single_jump: MCValue
    entrance: MCValue
    entrance_without_jump: MCValue
    lambda_x: MCValue
    counts: Dict[str, int] = field(default_factory=dict)
    asymptotic: Optional[AsymptoticValue] = None
    flags: List[str] = field(default_factory=list)

    def markov_chain_holds(self, k: float = 4.0) -> bool:
        """P(J >= 2) <= P(J >= 1) <= E[J] + k stderr"""
        return (self.jump_at_least_two.value <= self.jump_at_least_one.value
                and self.jump_at_least_one.value <= self.lambda_x.value + k * self.lambda_x.stderr)

    def sandwich_holds(self) -> bool:
        """P(J = 1) <= P(D in xA) <= P(J >= 1) + P(D in xA, J = 0), exact on hit counts"""
        c = self.counts
        return c['single_jump'] <= c['entrance'] <= c['jump_at_least_one'] + c['entrance_without_jump']

    def relative_to_lambda(self) -> Dict[str, MCValue]:
        """P(J >= 2) / Lambda_x and P(D in xA, J = 0) / Lambda_x with Lambda_x from the asymptotic value"""
        if self.asymptotic is None or not self.asymptotic.value > 0:
            raise ValueError("no positive asymptotic value attached")
        scale = self.asymptotic.value
        return {
            'multiple_jumps': MCValue(self.jump_at_least_two.value / scale, self.jump_at_least_two.stderr / scale),
            'no_jump_entrance': MCValue(self.entrance_without_jump.value / scale,
                                        self.entrance_without_jump.stderr / scale),
        }

    def to_rows(self) -> List[Dict]:
        rows = []
        scale = self.asymptotic.value if self.asymptotic is not None else math.nan
        for name in ('jump_at_least_one', 'jump_at_least_two', 'single_jump', 'entrance',
                     'entrance_without_jump', 'lambda_x'):
            value: MCValue = getattr(self, name)
            ratio = value.value / scale if scale and scale > 0 else math.nan
            half = float(get_settings()['estimators']['z']) * value.stderr / scale if scale and scale > 0 else math.nan
            rows.append({
                'x': self.x,
                'estimator': f"decomposition:{name}",
                'estimate': value.value,
                'stderr': value.stderr,
                'asymptotic': scale,
                'ratio': ratio,
                'ratio_ci_lo': ratio - half,
                'ratio_ci_hi': ratio + half,
                'n_paths': self.n_paths,
                'seed': self.seed,
            })
        return rows
