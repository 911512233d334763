"""
Confidence intervals for Monte Carlo proportions and means, and for the ratio
of an estimate to a deterministic-or-nearly asymptotic value.
"""

from typing import Optional, Tuple
import math

from core.settings import get_settings


def _z(z: Optional[float]) -> float:
    return float(z if z is not None else get_settings()['estimators']['z'])


def normal_interval(estimate: float, stderr: float, z: Optional[float] = None) -> Tuple[float, float]:
    z = _z(z)
    return (estimate - z * stderr, estimate + z * stderr)


def wilson_interval(hits: int, n: int, z: Optional[float] = None) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Args:
        hits: Number of successes
        n: Number of trials
        z: Normal quantile (default from settings)

    Returns:
        (lower, upper) within [0, 1]
    """
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if not 0 <= hits <= n:
        raise ValueError(f"hits must lie in [0, n], got {hits} of {n}")

    z = _z(z)
    p = hits / n
    denominator = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denominator
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denominator
    return (max(0.0, center - half), min(1.0, center + half))


def proportion_interval(hits: int, n: int, z: Optional[float] = None) -> Tuple[Tuple[float, float], str]:
    """Normal interval, or Wilson below the configured hit count; returns (interval, method)"""
    if hits < int(get_settings()['estimators']['wilson_below_hits']):
        return wilson_interval(hits, n, z), "wilson"
    p = hits / n
    return normal_interval(p, math.sqrt(p * (1 - p) / n), z), "normal"


def ratio_interval(estimate: float, stderr: float, asymptotic: float, asymptotic_error: float = 0.0,
                   z: Optional[float] = None) -> Tuple[float, float, float]:
    """
    Delta-method interval for estimate / asymptotic.

    Returns:
        (ratio, lower, upper)
    """
    if not asymptotic > 0:
        raise ValueError(f"asymptotic value must be positive, got {asymptotic!r}")
    ratio = estimate / asymptotic
    spread = math.hypot(stderr / asymptotic, estimate * asymptotic_error / asymptotic ** 2)
    lower, upper = normal_interval(ratio, spread, z)
    return ratio, lower, upper
