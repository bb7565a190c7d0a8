"""Synthetic streams with known change points, subspaces and severities.

Every generator builds a list of *concepts* (objects with a vectorised
``sample(n, rng)``) and stitches them together on a drift schedule. Random
numbers come from numpy's PCG64 (``np.random.default_rng(seed)``), so a
``(config, seed)`` pair reproduces the same stream on every platform.

Dimension indices are 0-based throughout.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np

from abcd.exceptions import DomainError

CHANGE_EVERY = 2000
RBF_NOISE_STD = 0.05

# seven-segment encodings of 0-9, segment order a, b, c, d, e, f, g
LED_SEGMENTS = np.array(
    [
        [1, 1, 1, 1, 1, 1, 0],
        [0, 1, 1, 0, 0, 0, 0],
        [1, 1, 0, 1, 1, 0, 1],
        [1, 1, 1, 1, 0, 0, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [1, 0, 1, 1, 0, 1, 1],
        [1, 0, 1, 1, 1, 1, 1],
        [1, 1, 1, 0, 0, 0, 0],
        [1, 1, 1, 1, 1, 1, 1],
        [1, 1, 1, 1, 0, 1, 1],
    ],
    dtype=np.float64,
)
LED_D = 24


@dataclass(frozen=True)
class DriftSchedule:
    """Where changes happen and how long each transition lasts.

    ``change_points=None`` means one change every ``len_per_concept``
    observations.
    """

    change_points: Optional[Sequence[int]] = None
    interval: int = 1

    def __post_init__(self):
        if self.interval < 1:
            raise DomainError("interval must be >= 1")
        cps = self.change_points
        if cps is not None and any(b <= a for a, b in zip(cps, cps[1:])):
            raise DomainError("change points must be strictly increasing")

    def resolve(self, n_concepts: int, len_per_concept: int) -> List[int]:
        if self.change_points is None:
            return [i * len_per_concept for i in range(1, n_concepts)]
        cps = [int(c) for c in self.change_points]
        if len(cps) != n_concepts - 1:
            raise DomainError(f"{n_concepts} concepts need {n_concepts - 1} change points, got {len(cps)}")
        return cps


@dataclass(frozen=True)
class Change:
    index: int
    subspace: tuple
    severity_param: float


@dataclass
class StreamWithTruth:
    observations: np.ndarray
    changes: List[Change]
    generator: str = ""
    seed: int = 0
    params: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return int(self.observations.shape[1])

    def __len__(self):
        return int(self.observations.shape[0])

    def head(self, n: int) -> "StreamWithTruth":
        return StreamWithTruth(
            self.observations[:n].copy(),
            [c for c in self.changes if c.index < n],
            self.generator,
            self.seed,
            dict(self.params),
        )

    def truth_dict(self) -> dict:
        return {
            "changes": [
                {"index": c.index, "subspace": list(c.subspace), "severity_param": c.severity_param}
                for c in self.changes
            ],
            "d": self.d,
            "generator": self.generator,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# drift


def drift_probability(position: int, interval: int) -> float:
    """Chance that the observation at 1-based ``position`` after a change uses the new concept."""
    if interval < 1:
        raise DomainError("interval must be >= 1")
    return min(1.0, max(position, 0) / interval)


def apply_drift(old_concept, new_concept, interval: int, rng: np.random.Generator) -> Callable[[int], np.ndarray]:
    """Sampling rule across one change: ``rule(position)`` draws one observation.

    ``position`` counts from 1 at the change point; positions <= 0 are pure old
    concept, positions >= ``interval`` pure new.
    """
    if interval < 1:
        raise DomainError("interval must be >= 1")

    def rule(position: int) -> np.ndarray:
        use_new = rng.random() < drift_probability(position, interval)
        concept = new_concept if use_new else old_concept
        return concept.sample(1, rng)[0]

    return rule


def _concept_labels(length: int, change_points: List[int], interval: int, rng) -> np.ndarray:
    labels = np.zeros(length, dtype=np.int64)
    bounds = list(change_points) + [length]
    for i, c in enumerate(change_points):
        if interval > bounds[i + 1] - c:
            raise DomainError("drift interval longer than the gap to the next change")
        labels[c : bounds[i + 1]] = i + 1
        pos = np.arange(1, interval + 1)
        stay_old = rng.random(interval) >= pos / interval
        labels[c : c + interval][stay_old] = i
    return labels


def _assemble(concepts, change_points, interval, length, rng) -> np.ndarray:
    if any(not 0 < c < length for c in change_points):
        raise DomainError("change points must lie inside the stream")
    labels = _concept_labels(length, change_points, interval, rng)
    X = np.empty((length, concepts[0].d))
    for j, concept in enumerate(concepts):
        mask = labels == j
        X[mask] = concept.sample(int(mask.sum()), rng)
    return X


def _check_dims(d: int, d_star: int):
    if d < 1:
        raise DomainError("d must be >= 1")
    if not 1 <= d_star <= d:
        raise DomainError(f"d_star must lie in [1, d={d}], got {d_star}")


# ---------------------------------------------------------------------------
# concepts


@dataclass
class HSphereConcept:
    d: int
    dims: np.ndarray
    radius: float
    center: np.ndarray

    def sample(self, n, rng):
        X = rng.uniform(size=(n, self.d))
        u = rng.normal(size=(n, len(self.dims)))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        X[:, self.dims] = np.clip(self.center + self.radius * u, 0.0, 1.0)
        return X


@dataclass
class NormalConcept:
    d: int
    dims: np.ndarray
    mu: np.ndarray
    sigma: float

    def sample(self, n, rng):
        X = rng.uniform(size=(n, self.d))
        X[:, self.dims] = np.clip(rng.normal(self.mu, self.sigma, size=(n, len(self.dims))), 0.0, 1.0)
        return X


@dataclass
class LEDConcept:
    noise: float
    d: int = LED_D

    def sample(self, n, rng):
        digits = rng.integers(0, 10, size=n)
        seg = LED_SEGMENTS[digits]
        flips = rng.random(size=seg.shape) < self.noise
        X = np.empty((n, self.d))
        X[:, :7] = np.where(flips, 1.0 - seg, seg)
        X[:, 7:] = rng.integers(0, 2, size=(n, self.d - 7))
        return X


@dataclass
class RBFLayer:
    centroids: np.ndarray
    dims: np.ndarray


@dataclass
class RBFConcept:
    """Stack of centroid sets; later layers overwrite their dimensions."""

    d: int
    layers: List[RBFLayer]
    noise_std: float

    def sample(self, n, rng):
        X = np.empty((n, self.d))
        for layer in self.layers:
            pick = rng.integers(0, layer.centroids.shape[0], size=n)
            vals = layer.centroids[pick] + rng.normal(0.0, self.noise_std, size=(n, self.d)) if self.noise_std else layer.centroids[pick]
            X[:, layer.dims] = vals[:, layer.dims]
        return np.clip(X, 0.0, 1.0)

    def dim_centroid_means(self) -> np.ndarray:
        out = np.empty(self.d)
        for layer in self.layers:
            out[layer.dims] = layer.centroids.mean(axis=0)[layer.dims]
        return out


# ---------------------------------------------------------------------------
# generators


def gen_hsphere(
    d: int,
    d_star: int,
    n_concepts: int,
    len_per_concept: int = CHANGE_EVERY,
    schedule: DriftSchedule = DriftSchedule(),
    seed: int = 0,
    radii: Optional[Sequence[float]] = None,
    centers: Optional[Sequence[Sequence[float]]] = None,
) -> StreamWithTruth:
    """Points on the surface of a ``d_star``-sphere plus ``d - d_star`` uniform dimensions.

    The sphere occupies the first ``d_star`` dimensions. Each concept draws a
    radius in [0.1, 0.4] and a center keeping the sphere inside the unit cube
    unless ``radii``/``centers`` are given.
    """
    _check_dims(d, d_star)
    rng = np.random.default_rng(seed)
    dims = np.arange(d_star)
    concepts = []
    for i in range(n_concepts):
        r = float(radii[i]) if radii is not None else float(rng.uniform(0.1, 0.4))
        c = np.asarray(centers[i], dtype=np.float64) if centers is not None else rng.uniform(r, 1.0 - r, size=d_star)
        concepts.append(HSphereConcept(d, dims, r, c))
    cps = schedule.resolve(n_concepts, len_per_concept)
    X = _assemble(concepts, cps, schedule.interval, n_concepts * len_per_concept, rng)
    changes = [
        Change(
            cp,
            tuple(int(j) for j in dims),
            abs(b.radius - a.radius) + float(np.linalg.norm(b.center - a.center)),
        )
        for cp, a, b in zip(cps, concepts, concepts[1:])
    ]
    return StreamWithTruth(X, changes, "hsphere", seed, {"d": d, "d_star": d_star})


def gen_normal(
    d: int,
    d_star: int,
    kind: str = "mean",
    shift_sizes: Sequence[float] = (0.3,),
    len_per_concept: int = CHANGE_EVERY,
    schedule: DriftSchedule = DriftSchedule(),
    seed: int = 0,
    sigma: float = 0.1,
    mu: Optional[Sequence[float]] = None,
) -> StreamWithTruth:
    """Independent normal dimensions (first ``d_star``) plus uniform noise.

    ``kind="mean"`` moves the mean of every normal dimension by ``shift``;
    the direction per dimension is random but kept inside [0.1, 0.9].
    ``kind="variance"`` multiplies the standard deviation by ``shift``.
    One concept per shift plus the initial one.
    """
    _check_dims(d, d_star)
    if kind not in ("mean", "variance"):
        raise DomainError("kind must be 'mean' or 'variance'")
    rng = np.random.default_rng(seed)
    dims = np.arange(d_star)
    m = np.asarray(mu, dtype=np.float64) if mu is not None else rng.uniform(0.3, 0.7, size=d_star)
    concepts = [NormalConcept(d, dims, m, sigma)]
    severities = []
    for s in shift_sizes:
        prev = concepts[-1]
        if kind == "mean":
            sign = rng.choice([-1.0, 1.0], size=d_star)
            new_mu = prev.mu + sign * s
            out = (new_mu < 0.1) | (new_mu > 0.9)
            new_mu[out] = prev.mu[out] - sign[out] * s
            concepts.append(NormalConcept(d, dims, new_mu, prev.sigma))
            severities.append(abs(float(s)))
        else:
            if not s > 0:
                raise DomainError("variance scale must be positive")
            concepts.append(NormalConcept(d, dims, prev.mu, prev.sigma * s))
            severities.append(abs(prev.sigma * s - prev.sigma))
    n_concepts = len(concepts)
    cps = schedule.resolve(n_concepts, len_per_concept)
    X = _assemble(concepts, cps, schedule.interval, n_concepts * len_per_concept, rng)
    changes = [Change(cp, tuple(int(j) for j in dims), sev) for cp, sev in zip(cps, severities)]
    name = "normal-m" if kind == "mean" else "normal-v"
    return StreamWithTruth(X, changes, name, seed, {"d": d, "d_star": d_star, "sigma": sigma})


def gen_led(
    n_concepts: int,
    len_per_concept: int = CHANGE_EVERY,
    noise_probs: Optional[Sequence[float]] = None,
    schedule: DriftSchedule = DriftSchedule(),
    seed: int = 0,
) -> StreamWithTruth:
    """Seven-segment digits with bit-flip noise plus 17 random bits.

    Without ``noise_probs`` each concept draws its flip probability from
    [0, 0.5].
    """
    rng = np.random.default_rng(seed)
    if noise_probs is None:
        noise_probs = rng.uniform(0.0, 0.5, size=n_concepts)
    noise_probs = [float(p) for p in noise_probs]
    if len(noise_probs) != n_concepts:
        raise DomainError("need one noise probability per concept")
    if any(not 0.0 <= p <= 0.5 for p in noise_probs):
        raise DomainError("noise probabilities must lie in [0, 0.5]")
    concepts = [LEDConcept(p) for p in noise_probs]
    cps = schedule.resolve(n_concepts, len_per_concept)
    X = _assemble(concepts, cps, schedule.interval, n_concepts * len_per_concept, rng)
    changes = [
        Change(cp, tuple(range(7)), abs(b - a)) for cp, a, b in zip(cps, noise_probs, noise_probs[1:])
    ]
    return StreamWithTruth(X, changes, "led", seed, {"d": LED_D})


def draw_subspace_size(d: int, rng: np.random.Generator) -> int:
    return int(rng.integers(1, d + 1))


def _rbf_centroids(generator_seed: int, n_centroids: int, d: int) -> np.ndarray:
    return np.random.default_rng(generator_seed).uniform(size=(n_centroids, d))


def gen_rbf(
    d: int,
    n_centroids: int,
    len_per_concept: int = CHANGE_EVERY,
    n_concepts: int = 2,
    schedule: DriftSchedule = DriftSchedule(),
    seed: int = 0,
    noise_std: float = RBF_NOISE_STD,
) -> StreamWithTruth:
    """Random centroid plus Gaussian noise; each change swaps in centroids from the next seed.

    The ``i``-th change takes centroids from a generator seeded with
    ``seed + i`` and uses them on a random subset of dimensions whose size is
    uniform on [1, d].
    """
    if n_centroids < 1:
        raise DomainError("n_centroids must be >= 1")
    rng = np.random.default_rng(seed)
    base = RBFLayer(_rbf_centroids(seed, n_centroids, d), np.arange(d))
    concepts = [RBFConcept(d, [base], noise_std)]
    subspaces, severities = [], []
    for i in range(1, n_concepts):
        size = draw_subspace_size(d, rng)
        dims = np.sort(rng.choice(d, size=size, replace=False))
        prev = concepts[-1]
        layer = RBFLayer(_rbf_centroids(seed + i, n_centroids, d), dims)
        new = RBFConcept(d, prev.layers + [layer], noise_std)
        shift = np.abs(new.dim_centroid_means() - prev.dim_centroid_means())[dims]
        concepts.append(new)
        subspaces.append(tuple(int(j) for j in dims))
        severities.append(float(shift.mean()))
    cps = schedule.resolve(n_concepts, len_per_concept)
    X = _assemble(concepts, cps, schedule.interval, n_concepts * len_per_concept, rng)
    changes = [Change(cp, s, sev) for cp, s, sev in zip(cps, subspaces, severities)]
    return StreamWithTruth(X, changes, "rbf", seed, {"d": d, "n_centroids": n_centroids})


GENERATORS = ("hsphere", "normal-m", "normal-v", "led", "rbf")


# ---------------------------------------------------------------------------
# serialisation


def write_csv(X: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(range(X.shape[1]))
        for row in X:
            w.writerow([repr(float(v)) for v in row])


def save_stream(stream: StreamWithTruth, prefix) -> tuple:
    """Write ``<prefix>.csv`` and the ``<prefix>.json`` truth sidecar."""
    prefix = Path(prefix)
    csv_path = prefix.with_suffix(".csv")
    json_path = prefix.with_suffix(".json")
    write_csv(stream.observations, csv_path)
    with open(json_path, "w") as fh:
        json.dump(stream.truth_dict(), fh, indent=2)
        fh.write("\n")
    return csv_path, json_path


def load_truth(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def load_stream(csv_path, truth_path) -> StreamWithTruth:
    X = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    truth = load_truth(truth_path)
    changes = [Change(int(c["index"]), tuple(c["subspace"]), float(c["severity_param"])) for c in truth["changes"]]
    if X.shape[1] != truth["d"]:
        raise DomainError(f"CSV has {X.shape[1]} columns but truth says d={truth['d']}")
    return StreamWithTruth(X, changes, truth.get("generator", ""), int(truth.get("seed", 0)))
