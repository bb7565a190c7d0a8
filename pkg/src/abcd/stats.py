"""Cumulative loss aggregates.

An :class:`Aggregate` summarises every loss from the window origin up to some
time ``i``. Given the aggregate at ``t`` and the one at ``k < t`` the
statistics of the suffix ``k+1..t`` follow in O(1), so any split of the window
can be evaluated without revisiting the raw losses.

``mean`` and ``ssd`` are the float64 values; ``mean_lo`` and ``ssd_lo`` carry
the rounding residue so that suffix extraction does not lose precision when a
suffix is short or nearly constant.
"""

from __future__ import annotations

from dataclasses import dataclass

from abcd import _dd
from abcd.exceptions import DomainError, SplitTooSmallError


@dataclass(frozen=True)
class Aggregate:
    n: int = 0
    mean: float = 0.0
    ssd: float = 0.0
    mean_lo: float = 0.0
    ssd_lo: float = 0.0


@dataclass(frozen=True)
class SplitStats:
    """Statistics of the two sides of a window split.

    ``var1``/``var2`` are sample variances (denominator ``n - 1``).
    """

    n1: int
    n2: int
    mean1: float
    mean2: float
    var1: float
    var2: float


def aggregate_init() -> Aggregate:
    return Aggregate(0, 0.0, 0.0)


def aggregate_update(prev: Aggregate, loss: float) -> Aggregate:
    """Welford update of ``prev`` with one new loss in [0, 1]."""
    if not (0.0 <= loss <= 1.0):
        raise DomainError(f"loss must lie in [0, 1], got {loss!r}")
    loss = float(loss)
    n = prev.n + 1
    dh, dl = _dd.sub(loss, 0.0, prev.mean, prev.mean_lo)
    qh, ql = _dd.div_d(dh, dl, float(n))
    mh, ml = _dd.add(prev.mean, prev.mean_lo, qh, ql)
    eh, el = _dd.sub(loss, 0.0, mh, ml)
    ph, pl = _dd.mul(dh, dl, eh, el)
    sh, sl = _dd.add(prev.ssd, prev.ssd_lo, ph, pl)
    if sh < 0.0:
        sh, sl = 0.0, 0.0
    return Aggregate(n, mh, sh, ml, sl)


def suffix_arrays(t, mean_t, mean_t_lo, ssd_t, ssd_t_lo, k, mean_k, mean_k_lo, ssd_k, ssd_k_lo):
    """Suffix mean and sum of squared deviations from two cumulative aggregates.

    Works elementwise on scalars or arrays; ``k`` is the prefix count.
    """
    n2 = t - k
    sth, stl = _dd.mul_d(mean_t, mean_t_lo, t)
    skh, skl = _dd.mul_d(mean_k, mean_k_lo, k)
    m2h, m2l = _dd.div_d(*_dd.sub(sth, stl, skh, skl), n2)
    gh, gl = _dd.sub(mean_k, mean_k_lo, m2h, m2l)
    gh, gl = _dd.mul(gh, gl, gh, gl)
    ch, cl = _dd.div_d(*_dd.mul_d(gh, gl, k * n2), t)  # k * n2 is exact for any realistic window
    rh, rl = _dd.sub(ssd_t, ssd_t_lo, ssd_k, ssd_k_lo)
    rh, _ = _dd.sub(rh, rl, ch, cl)
    return m2h, rh * (rh > 0.0)


def suffix_parts(whole: Aggregate, prefix: Aggregate) -> tuple[float, float]:
    """Mean and sum of squared deviations of the suffix ``prefix.n+1..whole.n``."""
    mean2, ssd2 = suffix_arrays(
        float(whole.n), whole.mean, whole.mean_lo, whole.ssd, whole.ssd_lo,
        float(prefix.n), prefix.mean, prefix.mean_lo, prefix.ssd, prefix.ssd_lo,
    )  # fmt: skip
    return float(mean2), float(ssd2)


def suffix_stats(whole: Aggregate, prefix: Aggregate) -> SplitStats:
    t, k = whole.n, prefix.n
    if k < 2 or t - k < 2:
        raise SplitTooSmallError(f"split needs >= 2 observations per side (t={t}, k={k})")
    mean2, ssd2 = suffix_parts(whole, prefix)
    return SplitStats(
        n1=k,
        n2=t - k,
        mean1=prefix.mean,
        mean2=mean2,
        var1=prefix.ssd / (k - 1),
        var2=ssd2 / (t - k - 1),
    )
