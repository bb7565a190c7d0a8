"""Per-dimension min-max scaling into the unit cube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Normalizer:
    lo: np.ndarray
    hi: np.ndarray
    clamp: bool = True

    @classmethod
    def fit(cls, X, clamp: bool = True) -> "Normalizer":
        X = np.asarray(X, dtype=np.float64)
        return cls(X.min(axis=0), X.max(axis=0), clamp)

    def transform(self, x) -> np.ndarray:
        return normalize(x, self)


def normalize(x, norm: Normalizer) -> np.ndarray:
    """Scale ``x`` with the fitted bounds. Constant dimensions map to 0.5."""
    x = np.asarray(x, dtype=np.float64)
    span = norm.hi - norm.lo
    flat = span <= 0
    out = (x - norm.lo) / np.where(flat, 1.0, span)
    out = np.where(flat, 0.5, out)
    if norm.clamp:
        out = np.clip(out, 0.0, 1.0)
    return out
