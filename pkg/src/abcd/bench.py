"""Evaluation metrics and the parameter-grid harness."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from abcd.detector import ABCD, ChangeReport, DetectorConfig
from abcd.exceptions import DomainError, UndefinedCorrelationError
from abcd.generators import StreamWithTruth

CSV_HEADER = [
    "stream_id", "generator", "seed", "model", "eta", "epochs", "delta", "tau", "kmax",
    "tp", "fp", "fn", "precision", "recall", "f1", "mtd", "sacc", "spearman_rho",
]  # fmt: skip


def _check_sorted(xs, name):
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise DomainError(f"{name} must be sorted")


def match_detections(detections: Sequence[int], changes: Sequence[int], stream_end: int):
    """Assign detections to changes.

    Change ``i`` owns the interval ``(c_i, c_{i+1}]`` (the last one ends at
    ``stream_end``). Returns, per change, the position in ``detections`` of its
    first detection or ``None``, plus the number of false positives.
    """
    _check_sorted(detections, "detections")
    _check_sorted(changes, "changes")
    first: List[Optional[int]] = [None] * len(changes)
    fp = 0
    ci = -1
    for di, t in enumerate(detections):
        while ci + 1 < len(changes) and changes[ci + 1] < t:
            ci += 1
        upper = changes[ci + 1] if ci + 1 < len(changes) else stream_end
        if ci < 0 or t > upper:
            fp += 1
        elif first[ci] is None:
            first[ci] = di
        else:
            fp += 1
    return first, fp


def score_detections(detections: Sequence[int], changes: Sequence[int], stream_end: int):
    """``(tp, fp, fn, mtd)``; ``mtd`` is ``nan`` when there is no true positive."""
    first, fp = match_detections(detections, changes, stream_end)
    delays = [detections[f] - c for f, c in zip(first, changes) if f is not None]
    tp = len(delays)
    mtd = float(np.mean(delays)) if delays else math.nan
    return tp, fp, len(changes) - tp, mtd


def prf(tp: int, fp: int, fn: int):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def subspace_accuracy(detected, truth, d: int) -> float:
    detected, truth = set(detected), set(truth)
    tp = len(detected & truth)
    tn = d - len(detected | truth)
    return (tp + tn) / d


def spearman(xs, ys) -> float:
    """Pearson correlation of average ranks."""
    if len(xs) != len(ys):
        raise DomainError("spearman needs equal-length inputs")
    if len(xs) < 2:
        raise UndefinedCorrelationError("need at least two pairs")
    rx = rankdata(xs) - (len(xs) + 1) / 2
    ry = rankdata(ys) - (len(ys) + 1) / 2
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if den == 0:
        raise UndefinedCorrelationError("constant ranks")
    return max(-1.0, min(1.0, float(rx @ ry) / den))


@dataclass
class Metrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    mtd: float
    sacc: float
    spearman_rho: float


@dataclass
class RunResult:
    detections: List[ChangeReport]
    truth: list
    fingerprint: str
    d: int
    length: int

    def metrics(self) -> Metrics:
        return evaluate(self.detections, self.truth, self.d, self.length)

    def pairs(self):
        """(reported severity, true severity, SAcc) for every true positive."""
        times = [r.t_detected for r in self.detections]
        first, _ = match_detections(times, [c.index for c in self.truth], self.length)
        out = []
        for f, c in zip(first, self.truth):
            if f is not None:
                r = self.detections[f]
                out.append((r.severity, c.severity_param, subspace_accuracy(r.subspace, c.subspace, self.d)))
        return out


def evaluate(detections: Sequence[ChangeReport], truth, d: int, length: int) -> Metrics:
    times = [r.t_detected for r in detections]
    tp, fp, fn, mtd = score_detections(times, [c.index for c in truth], length)
    precision, recall, f1 = prf(tp, fp, fn)
    pairs = RunResult(list(detections), list(truth), "", d, length).pairs()
    sacc = float(np.mean([p[2] for p in pairs])) if pairs else math.nan
    try:
        rho = spearman([p[0] for p in pairs], [p[1] for p in pairs])
    except UndefinedCorrelationError:
        rho = math.nan
    return Metrics(tp, fp, fn, precision, recall, f1, mtd, sacc, rho)


def config_dict(config: DetectorConfig) -> dict:
    return asdict(config)


def fingerprint(stream_id: str, config: DetectorConfig) -> str:
    blob = json.dumps({"stream": stream_id, "config": config_dict(config)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_stream(stream: StreamWithTruth, config: DetectorConfig, stream_id: str = "") -> RunResult:
    det = ABCD(config)
    reports = det.run(stream.observations)
    return RunResult(reports, list(stream.changes), fingerprint(stream_id, config), stream.d, len(stream))


@dataclass
class GridRow:
    stream_id: str
    generator: str
    seed: int
    config: DetectorConfig
    fingerprint: str
    metrics: Optional[Metrics] = None
    error: Optional[str] = None
    pairs: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def csv_row(self) -> list:
        c, m = self.config, self.metrics
        return [
            self.stream_id, self.generator, self.seed, c.model.kind, c.model.eta, c.model.epochs,
            c.delta, c.tau, c.k_max, m.tp, m.fp, m.fn, m.precision, m.recall, m.f1, m.mtd,
            m.sacc, m.spearman_rho,
        ]  # fmt: skip


def _cell(args):
    stream, stream_id, config = args
    fp = fingerprint(stream_id, config)
    try:
        res = run_stream(stream, config, stream_id)
        return GridRow(stream_id, stream.generator, stream.seed, config, fp, res.metrics(), pairs=res.pairs())
    except Exception as exc:  # a failing cell must not stop the grid
        msg = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return GridRow(stream_id, stream.generator, stream.seed, config, fp, error=msg)


def run_grid(
    streams: Sequence[StreamWithTruth],
    configs: Sequence[DetectorConfig],
    stream_ids: Optional[Sequence[str]] = None,
    jobs: int = 1,
) -> List[GridRow]:
    """One row per (stream, config), ordered stream-major regardless of ``jobs``."""
    if not streams or not configs:
        raise DomainError("run_grid needs at least one stream and one config")
    if stream_ids is None:
        stream_ids = [f"s{i}" for i in range(len(streams))]
    cells = [(s, sid, c) for s, sid in zip(streams, stream_ids) for c in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_cell, cells))
    return [_cell(c) for c in cells]


def write_metrics_csv(rows: Sequence[GridRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        if not row.failed:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row.csv_row()])
