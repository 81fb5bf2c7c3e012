"""Binomial interval estimates shared by the statistics, tree and Bell modules."""

from __future__ import annotations

import math
from statistics import NormalDist

Z95 = NormalDist().inv_cdf(0.975)


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion ``k / n``."""
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    z2 = z * z
    denom = 1 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n > 0 else math.inf


def adjusted_sigma(k: int, n: int) -> float:
    """Standard error of ``k / n`` with two pseudo-successes and two pseudo-failures added.

    Stays positive when ``k`` is 0 or ``n``, where the plain estimate collapses
    to zero and would make every margin test trivially tight.
    """
    n_t = n + 4
    p_t = (k + 2) / n_t
    return math.sqrt(p_t * (1 - p_t) / n_t)


def correlation_from_counts(n_same: int, n: int) -> tuple[float, float]:
    """Mean product ``E = 2 P(same sign) - 1`` of paired ``+-1`` outcomes and its standard error."""
    if n <= 0:
        raise ValueError("no paired outcomes")
    return 2 * n_same / n - 1, 2 * adjusted_sigma(n_same, n)
