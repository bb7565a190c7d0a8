"""Bernstein two-sample bound and the windowed change score."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from abcd.exceptions import DomainError, NoSplitsError
from abcd.stats import SplitStats

KAPPA_MIN = 0.05
_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class BernsteinParams:
    """Parameters of the bound.

    M bounds ``|loss - E[loss]|`` almost surely; 1 is the theoretical limit for
    losses in [0, 1] but 0.1 is far less conservative in practice.
    """

    M: float = 0.1
    delta: float = 0.05
    kappa_min: float = KAPPA_MIN

    def __post_init__(self):
        if not self.M > 0:
            raise DomainError("M must be positive")
        if not 0 < self.delta < 1:
            raise DomainError("delta must lie in (0, 1)")
        if not 0 < self.kappa_min < 0.5:
            raise DomainError("kappa_min must lie in (0, 0.5)")


@dataclass(frozen=True)
class ScoreResult:
    p: float
    split_index: int
    epsilon: float


def kappa(n1, n2, kappa_min: float = KAPPA_MIN):
    """Union-bound weight ``n2 / (n1 + n2)`` clamped to ``[kappa_min, 1 - kappa_min]``.

    Works elementwise on arrays.
    """
    k = np.clip(np.divide(n2, np.add(n1, n2), dtype=np.float64), kappa_min, 1.0 - kappa_min)
    return float(k) if np.ndim(k) == 0 else k


def observed_gap(mean1, mean2):
    """``|mean1 - mean2|`` with differences below float resolution snapped to 0."""
    gap = np.abs(np.subtract(mean1, mean2))
    noise = 8 * np.finfo(np.float64).eps * np.maximum(np.abs(mean1), np.abs(mean2))
    return np.where(gap <= noise, 0.0, gap)


def _log_term(n, share, var, eps, M):
    # exponent of one Bernstein term; a zero numerator gives 0 even when var == 0
    num = n * (share * eps) ** 2
    den = 2.0 * (var + share * M * eps / 3.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -num / den
    return np.where(num > 0, out, 0.0)


def bound_array(n1, n2, var1, var2, eps, M: float, kappa_min: float = KAPPA_MIN, fixed_kappa=None) -> np.ndarray:
    """Vectorised bound over arrays of splits.

    ``fixed_kappa`` replaces the count-based weight; the bound holds for any
    weight in [0, 1].
    """
    n1 = np.asarray(n1, dtype=np.float64)
    n2 = np.asarray(n2, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if fixed_kappa is None:
        k = np.clip(n2 / (n1 + n2), kappa_min, 1.0 - kappa_min)
    else:
        k = np.asarray(fixed_kappa, dtype=np.float64)
    a = _log_term(n1, k, np.asarray(var1, dtype=np.float64), eps, M)
    b = _log_term(n2, 1.0 - k, np.asarray(var2, dtype=np.float64), eps, M)
    p = 2.0 * np.exp(a) + 2.0 * np.exp(b)
    return np.maximum(p, _TINY)


def bernstein_bound(
    stats: SplitStats,
    epsilon: float,
    params: BernsteinParams = BernsteinParams(),
    fixed_kappa: Optional[float] = None,
) -> float:
    """Upper bound on ``P(|mean1 - mean2| >= epsilon)`` under equal means; lies in (0, 4].

    The union-bound weight comes from the counts unless ``fixed_kappa`` is given.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be non-negative")
    if fixed_kappa is not None and not 0 <= fixed_kappa <= 1:
        raise DomainError("fixed_kappa must lie in [0, 1]")
    return float(
        bound_array(stats.n1, stats.n2, stats.var1, stats.var2, epsilon, params.M, params.kappa_min, fixed_kappa)
    )


def change_score(window_stats: Sequence[SplitStats], params: BernsteinParams = BernsteinParams()) -> ScoreResult:
    """Minimum bound over the given splits.

    ``split_index`` is the prefix size ``n1`` of the minimising split. Ties go to
    the earliest split.
    """
    if len(window_stats) == 0:
        raise NoSplitsError("change score needs at least one split")
    n1 = np.array([s.n1 for s in window_stats], dtype=np.float64)
    n2 = np.array([s.n2 for s in window_stats], dtype=np.float64)
    v1 = np.array([s.var1 for s in window_stats])
    v2 = np.array([s.var2 for s in window_stats])
    eps = observed_gap(np.array([s.mean1 for s in window_stats]), np.array([s.mean2 for s in window_stats]))
    p = bound_array(n1, n2, v1, v2, eps, params.M, params.kappa_min)
    i = int(np.argmin(p))
    return ScoreResult(float(p[i]), int(window_stats[i].n1), float(eps[i]))


def min_n1(sigma1: float, epsilon: float, params: BernsteinParams = BernsteinParams(), kappa: float = 1.0) -> int:
    """Smallest first-window size at which a mean difference ``epsilon`` becomes detectable."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    if not 0 < kappa <= 1:
        raise DomainError("kappa must lie in (0, 1]")
    ke = kappa * epsilon
    return math.ceil(2.0 * math.log(2.0 / params.delta) * (sigma1**2 / ke**2 + params.M / (3.0 * ke)))
