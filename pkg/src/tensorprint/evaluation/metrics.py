"""Detection metrics: precision, recall, F-beta and miss / false-alarm curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "MetricError",
    "Counts",
    "f_score",
    "counts_at",
    "sweep_counts",
    "roc_curve",
    "miss_false_alarm_area",
]


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class Counts:
    """Confusion counts at one threshold; a pair is called a copy when ``distance <= tau``."""

    tau: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn

    @property
    def precision(self) -> float:
        called = self.tp + self.fp
        return self.tp / called if called else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.positives if self.positives else 0.0

    @property
    def miss(self) -> float:
        return self.fn / self.positives if self.positives else 0.0

    @property
    def false_alarm(self) -> float:
        return self.fp / self.negatives if self.negatives else 0.0

    def f_score(self, beta: float = 0.5) -> float:
        return f_score(self.precision, self.recall, beta)


def f_score(pp: float, pr: float, beta: float = 0.5) -> float:
    """``(1 + b^2) pp pr / (b^2 pp + pr)``; zero whenever recall is zero."""
    for name, v in (("precision", pp), ("recall", pr)):
        if not 0.0 <= v <= 1.0:
            raise MetricError(f"{name} must lie in [0, 1], got {v}")
    if not beta > 0:
        raise MetricError("beta must be positive")
    if pr == 0:
        return 0.0
    b2 = beta * beta
    return (1.0 + b2) * pp * pr / (b2 * pp + pr)


def _split(pairs) -> tuple:
    arr = list(pairs)
    if not arr:
        raise MetricError("no distance pairs")
    d = np.array([float(p[0]) for p in arr])
    y = np.array([bool(p[1]) for p in arr])
    if not np.all(np.isfinite(d)):
        raise MetricError("distances must be finite")
    return d, y


def counts_at(pairs: Iterable, tau: float) -> Counts:
    d, y = _split(pairs)
    called = d <= tau
    tp = int(np.sum(called & y))
    fp = int(np.sum(called & ~y))
    return Counts(float(tau), tp, fp, int(np.sum(~y)) - fp, int(np.sum(y)) - tp)


def sweep_counts(pairs: Iterable) -> list:
    """Counts at every distinct distance, ascending, preceded by a threshold below all of them."""
    d, y = _split(pairs)
    order = np.argsort(d, kind="stable")
    d, y = d[order], y[order]
    pos, neg = int(y.sum()), int((~y).sum())
    cum_tp = np.cumsum(y)
    cum_fp = np.cumsum(~y)
    # last index of each run of equal distances
    ends = np.flatnonzero(np.r_[d[1:] != d[:-1], True])
    out = [Counts(float(np.nextafter(d[0], -np.inf)), 0, 0, neg, pos)]
    for e in ends:
        tp, fp = int(cum_tp[e]), int(cum_fp[e])
        out.append(Counts(float(d[e]), tp, fp, neg - fp, pos - tp))
    return out


def roc_curve(pair_distances: Iterable) -> list:
    """``(false_alarm, miss)`` points as the threshold sweeps over the distinct distances.

    The first point is (0, 1), a threshold below every distance; the last is
    (1, 0). False alarm never decreases and miss never increases along the list.
    """
    d, y = _split(pair_distances)
    if y.all() or not y.any():
        raise MetricError("ROC needs both copy and non-copy pairs")
    return [(c.false_alarm, c.miss) for c in sweep_counts(zip(d, y))]


def miss_false_alarm_area(points) -> float:
    """Trapezoidal area under miss as a function of false alarm; 0 is perfect, 0.5 is chance."""
    # curve order: false alarm ascending, and miss descending within a vertical step
    pts = sorted(((float(fa), float(m)) for fa, m in points), key=lambda p: (p[0], -p[1]))
    if len(pts) < 2:
        raise MetricError("need at least two curve points")
    fa = np.array([p[0] for p in pts])
    miss = np.array([p[1] for p in pts])
    return float(np.sum(np.diff(fa) * (miss[1:] + miss[:-1]) * 0.5))
