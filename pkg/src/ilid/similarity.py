"""Pairwise agreement between subsample forecasts.

Pearson uses the centred cross-product form

    r = sum((a - mean(a)) * (b - mean(b))) / sqrt(sum((a - mean(a))**2) * sum((b - mean(b))**2))

clamped to [-1, 1]. Distance metrics become similarities through ``1 / (1 + d)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

METRICS = ("pearson", "euclidean", "manhattan")


class UndefinedCorrelationError(ValueError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("pearson needs two 1-D vectors of equal length")
    if a.size < 2:
        raise ValueError("pearson needs at least two points")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("pearson inputs must be finite")
    da = a - a.mean()
    db = b - b.mean()
    saa = float(da @ da)
    sbb = float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        raise UndefinedCorrelationError("undefined correlation: zero variance input")
    r = float(da @ db) / math.sqrt(saa * sbb)
    return min(1.0, max(-1.0, r))


def distance_similarity(a, b, metric: str) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError("distance similarity needs two non-empty 1-D vectors of equal length")
    diff = a - b
    if metric == "euclidean":
        d = math.sqrt(float(diff @ diff))
    elif metric == "manhattan":
        d = float(np.abs(diff).sum())
    else:
        raise ValueError(f"unknown distance metric {metric!r}")
    if not math.isfinite(d):
        raise ValueError("distance similarity inputs must be finite")
    return 1.0 / (1.0 + d)


def similarity(a, b, metric: str) -> float:
    if metric == "pearson":
        return pearson(a, b)
    return distance_similarity(a, b, metric)


def pair_order(S: int) -> list[tuple[int, int]]:
    """Lexicographic pairs (0,1), (0,2), ..., (S-2, S-1)."""
    return list(itertools.combinations(range(S), 2))


@dataclass
class PairwiseScores:
    metric: str
    scores: np.ndarray
    pairs: list
    undefined_pairs: list = field(default_factory=list)

    def __len__(self):
        return len(self.scores)


def pairwise_scores(forecasts, metric: str, undefined: str = "raise") -> PairwiseScores:
    """Score every forecast pair in lexicographic order.

    ``undefined="zero"`` replaces an undefined Pearson pair with 0.0 and records
    the pair in ``undefined_pairs`` instead of raising.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    forecasts = [np.asarray(f, dtype=float).reshape(-1) for f in forecasts]
    S = len(forecasts)
    if S < 2:
        raise ValueError("need at least two forecasts")
    lengths = {f.size for f in forecasts}
    if len(lengths) != 1:
        raise ValueError(f"forecasts have mixed lengths {sorted(lengths)}")
    h = lengths.pop()
    if metric == "pearson" and h < 2:
        raise ValueError("pearson needs forecasts of length >= 2")
    pairs = pair_order(S)
    scores = np.empty(len(pairs))
    bad = []
    for n, (i, j) in enumerate(pairs):
        try:
            scores[n] = similarity(forecasts[i], forecasts[j], metric)
        except UndefinedCorrelationError as exc:
            if undefined != "zero":
                raise UndefinedCorrelationError(f"{exc} (pair {i},{j})", pair=(i, j)) from None
            scores[n] = 0.0
            bad.append((i, j))
    return PairwiseScores(metric, scores, pairs, bad)


def aggregate(scores, subset=None) -> float:
    """Arithmetic mean of the selected pair scores (all of them when ``subset`` is None)."""
    values = np.asarray(getattr(scores, "scores", scores), dtype=float)
    if subset is None:
        subset = range(values.size)
    idx = sorted(set(int(i) for i in subset))
    if not idx:
        raise ValueError("aggregation subset is empty")
    if idx[0] < 0 or idx[-1] >= values.size:
        raise IndexError(f"subset indices {idx} out of range for {values.size} scores")
    return float(np.mean(values[idx]))
