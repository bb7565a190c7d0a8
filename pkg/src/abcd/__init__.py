"""Adaptive Bernstein change detection for high-dimensional data streams."""

from abcd.bernstein import BernsteinParams, ScoreResult, bernstein_bound, change_score, kappa, min_n1
from abcd.detector import ABCD, ChangeReport, DetectorConfig
from abcd.exceptions import DomainError
from abcd.models import ModelConfig, loss, train
from abcd.stats import Aggregate, SplitStats, aggregate_init, aggregate_update, suffix_stats

__all__ = [
    "ABCD",
    "Aggregate",
    "BernsteinParams",
    "ChangeReport",
    "DetectorConfig",
    "DomainError",
    "ModelConfig",
    "ScoreResult",
    "SplitStats",
    "aggregate_init",
    "aggregate_update",
    "bernstein_bound",
    "change_score",
    "kappa",
    "loss",
    "min_n1",
    "suffix_stats",
    "train",
]

__version__ = "0.1.0"
