"""The ABCD main loop.

The detector is a sequential state machine fed one observation at a time via
:meth:`ABCD.process`. Stream positions in reports are 0-based: ``t_detected``
is the index of the observation that triggered the alarm and ``t_star`` the
index of the first observation after the estimated change point, so the
observations ``t_star .. t_detected`` are the ones kept for the next model.
Dimensions are 0-based as well.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Optional

import numpy as np

from abcd.bernstein import BernsteinParams, ScoreResult, bound_array, observed_gap
from abcd.exceptions import DomainError, SeverityUndefinedError
from abcd.models import EncoderDecoder, ModelConfig, train
from abcd.normalize import Normalizer
from abcd.stats import Aggregate, aggregate_init, aggregate_update, suffix_arrays

SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class DetectorConfig:
    delta: float = 0.05
    tau: float = 2.5
    n_min: int = 100
    k_max: int = 20
    n_max: Optional[int] = None
    M: float = 0.1
    model: ModelConfig = field(default_factory=ModelConfig)
    normalize: bool = False

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise DomainError("delta must lie in (0, 1)")
        if not 0 <= self.tau <= 4:
            raise DomainError("tau must lie in [0, 4]")
        if self.n_min < 4:
            raise DomainError("n_min must be >= 4")
        if self.k_max < 1:
            raise DomainError("k_max must be >= 1")
        if self.n_max is not None and self.n_max < 4:
            raise DomainError("n_max must be >= 4")
        if not self.M > 0:
            raise DomainError("M must be positive")

    @property
    def bernstein(self) -> BernsteinParams:
        return BernsteinParams(M=self.M, delta=self.delta)


@dataclass(frozen=True)
class ChangeReport:
    t_detected: int
    t_star: int
    p: float
    subspace: tuple
    severity: float
    subspace_fallback: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["subspace"] = list(self.subspace)
        return out


class AdaptiveWindow:
    """Growable column store of scored window entries.

    Each entry holds the cumulative aggregate at its time, the per-dimension
    loss vector and the raw observation. Dropping the oldest entries is O(1)
    amortised; cumulative aggregates keep referencing the window origin.
    """

    def __init__(self, d: int, capacity: int = 256):
        self.d = d
        self._start = 0
        self._end = 0
        self._alloc(capacity)

    def _alloc(self, capacity):
        self.agg_n = np.zeros(capacity, dtype=np.int64)
        self.agg_mean = np.zeros(capacity)
        self.agg_ssd = np.zeros(capacity)
        self.agg_mean_lo = np.zeros(capacity)
        self.agg_ssd_lo = np.zeros(capacity)
        self.losses = np.zeros((capacity, self.d))
        self.xs = np.zeros((capacity, self.d))
        self.index = np.zeros(capacity, dtype=np.int64)

    def __len__(self):
        return self._end - self._start

    def _make_room(self):
        cap = self.agg_n.shape[0]
        n = len(self)
        names = ("agg_n", "agg_mean", "agg_ssd", "agg_mean_lo", "agg_ssd_lo", "losses", "xs", "index")
        old = {k: getattr(self, k)[self._start : self._end] for k in names}
        if n + 1 > cap // 2:
            self._alloc(cap * 2)
        for k in names:
            getattr(self, k)[:n] = old[k]
        self._start, self._end = 0, n

    def append(self, agg: Aggregate, loss_vec: np.ndarray, x: np.ndarray, index: int):
        if self._end == self.agg_n.shape[0]:
            self._make_room()
        i = self._end
        self.agg_n[i] = agg.n
        self.agg_mean[i] = agg.mean
        self.agg_ssd[i] = agg.ssd
        self.agg_mean_lo[i] = agg.mean_lo
        self.agg_ssd_lo[i] = agg.ssd_lo
        self.losses[i] = loss_vec
        self.xs[i] = x
        self.index[i] = index
        self._end += 1

    def evict_oldest(self, count: int = 1):
        self._start = min(self._start + count, self._end)

    def view(self, name: str) -> np.ndarray:
        return getattr(self, name)[self._start : self._end]

    def aggregate(self, pos: int) -> Aggregate:
        i = self._start + pos
        return Aggregate(
            int(self.agg_n[i]),
            float(self.agg_mean[i]),
            float(self.agg_ssd[i]),
            float(self.agg_mean_lo[i]),
            float(self.agg_ssd_lo[i]),
        )


def select_splits(window_len: int, k_max: int) -> List[int]:
    """Prefix sizes (counted in window entries) at which the window is split."""
    if window_len <= k_max:
        return list(range(2, window_len - 1))
    cand = {(i * window_len) // k_max for i in range(1, k_max + 1)}
    return sorted(k for k in cand if 2 <= k <= window_len - 2)


def split_bounds(window: AdaptiveWindow, splits, M: float):
    """Bounds, epsilons and prefix counts for every split of ``window``."""
    pos = np.asarray(splits, dtype=np.int64) - 1
    last = len(window) - 1
    col = {k: window.view(k) for k in ("agg_n", "agg_mean", "agg_mean_lo", "agg_ssd", "agg_ssd_lo")}
    n1 = col["agg_n"][pos].astype(np.float64)
    mean1 = col["agg_mean"][pos]
    ssd1 = col["agg_ssd"][pos]
    t = float(col["agg_n"][last])
    n2 = t - n1
    whole = [float(col[k][last]) for k in ("agg_mean", "agg_mean_lo", "agg_ssd", "agg_ssd_lo")]
    mean2, ssd2 = suffix_arrays(t, *whole, n1, mean1, col["agg_mean_lo"][pos], ssd1, col["agg_ssd_lo"][pos])
    eps = observed_gap(mean1, mean2)
    p = bound_array(n1, n2, ssd1 / (n1 - 1), ssd2 / (n2 - 1), eps, M)
    return p, eps, n1


def detect_subspace(losses: np.ndarray, t_star: int, tau: float, M: float) -> tuple:
    """Dimensions whose loss differs before/after position ``t_star``.

    ``losses`` is the ``(t, d)`` matrix of per-dimension squared errors; rows
    ``< t_star`` precede the change. Standard deviations are population ones.
    """
    t = losses.shape[0]
    if not 2 <= t_star <= t - 2:
        raise DomainError(f"t_star={t_star} outside [2, {t - 2}]")
    before, after = losses[:t_star], losses[t_star:]
    mu1, mu2 = before.mean(axis=0), after.mean(axis=0)
    var1, var2 = before.var(axis=0), after.var(axis=0)
    p = bound_array(t_star, t - t_star, var1, var2, observed_gap(mu1, mu2), M)
    return tuple(int(j) for j in np.flatnonzero(p < tau))


def severity(losses: np.ndarray, t_star: int, subspace) -> float:
    """Standardised shift of the mean subspace loss after ``t_star``."""
    dims = list(subspace)
    if not dims:
        raise SeverityUndefinedError("severity needs a non-empty subspace")
    if t_star < 2:
        raise DomainError("t_star must be >= 2")
    per_instance = losses[:, dims].mean(axis=1)
    before, after = per_instance[:t_star], per_instance[t_star:]
    sigma = max(float(before.std()), SIGMA_FLOOR)
    return abs(float(after.mean()) - float(before.mean())) / sigma


class ABCD:
    """Adaptive Bernstein change detector.

    >>> det = ABCD(DetectorConfig())
    >>> reports = det.run(stream)          # doctest: +SKIP
    """

    def __init__(self, config: DetectorConfig = DetectorConfig()):
        self.config = config
        self.d: Optional[int] = None
        self.t = -1
        self.model: Optional[EncoderDecoder] = None
        self.normalizer: Optional[Normalizer] = None
        self.last_score: Optional[ScoreResult] = None
        self.n_trainings = 0
        self._raw: list = []
        self._raw_index: list = []
        self._agg = aggregate_init()
        self._window: Optional[AdaptiveWindow] = None

    @property
    def window(self) -> Optional[AdaptiveWindow]:
        return self._window

    @property
    def warming_up(self) -> bool:
        return self.model is None

    def _validate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).ravel()
        if self.d is None:
            self.d = x.shape[0]
            self._window = AdaptiveWindow(self.d)
        elif x.shape[0] != self.d:
            raise DomainError(f"expected dimension {self.d}, got {x.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise DomainError("observation contains non-finite values")
        if not self.config.normalize and (x.min() < 0.0 or x.max() > 1.0):
            raise DomainError("observation outside [0, 1]; enable normalize or rescale upstream")
        return x

    def _train(self):
        X = np.asarray(self._raw)
        if self.config.normalize:
            self.normalizer = Normalizer.fit(X)
            X = self.normalizer.transform(X)
        self.model = train(X, self.config.model)
        self.n_trainings += 1
        self._raw, self._raw_index = [], []
        self._agg = aggregate_init()

    def process(self, x) -> Optional[ChangeReport]:
        """Feed one observation; returns a report when a change is detected."""
        x = self._validate(x)
        self.t += 1
        if self.model is None:
            self._raw.append(x)
            self._raw_index.append(self.t)
            if len(self._raw) >= self.config.n_min:
                self._train()
            return None

        xn = self.normalizer.transform(x) if self.normalizer is not None else x
        x_hat = self.model.reconstruct(xn)
        per_dim = (xn - x_hat) ** 2
        self._agg = aggregate_update(self._agg, float(per_dim.mean()))
        w = self._window
        w.append(self._agg, per_dim, x, self.t)
        if self.config.n_max is not None and len(w) > self.config.n_max:
            w.evict_oldest(len(w) - self.config.n_max)
        if len(w) < 4:
            self.last_score = None
            return None

        splits = select_splits(len(w), self.config.k_max)
        p, eps, _ = split_bounds(w, splits, self.config.M)
        i = int(np.argmin(p))
        k = splits[i]
        self.last_score = ScoreResult(float(p[i]), k, float(eps[i]))
        if p[i] >= self.config.delta:
            return None
        return self._on_change(k, float(p[i]))

    def _on_change(self, k: int, p: float) -> ChangeReport:
        w = self._window
        losses = w.view("losses")
        subspace = detect_subspace(losses, k, self.config.tau, self.config.M)
        fallback = len(subspace) == 0
        sev = severity(losses, k, subspace if not fallback else range(self.d))
        index = w.view("index")
        report = ChangeReport(
            t_detected=self.t,
            t_star=int(index[k]),
            p=p,
            subspace=subspace,
            severity=sev,
            subspace_fallback=fallback,
        )
        # restart on the post-change part of the window, raw observations only
        self._raw = list(w.view("xs")[k:].copy())
        self._raw_index = list(index[k:])
        self._window = AdaptiveWindow(self.d)
        self._agg = aggregate_init()
        self.model = None
        self.normalizer = None
        self.last_score = None
        if len(self._raw) >= self.config.n_min:
            self._train()
        return report

    def run(self, stream: Iterable) -> List[ChangeReport]:
        reports = []
        for x in stream:
            r = self.process(x)
            if r is not None:
                reports.append(r)
        return reports

    @property
    def retained(self) -> int:
        """Observations currently held: raw warm-up rows plus scored entries."""
        return len(self._raw) + (len(self._window) if self._window is not None else 0)
