"""Streaming evaluation: rolling-window AUC, log-loss, relative information gain.

Windows are non-overlapping (stride equals the window size); a window with a
single label class has no defined AUC and yields ``None`` in the series
rather than an error. Metric streams serialize as tab-separated text lines
``index<TAB>metric<TAB>value`` for downstream harnesses.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata

from .errors import ContractError

LOSS_CLAMP = 1e-7


def window_auc(scores, labels) -> float | None:
    """Rank-based (Mann-Whitney) AUC with midranks for ties.

    Returns None when only one class is present. An all-ties window scores
    0.5 by the midrank convention.
    """
    labels = np.asarray(labels)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(np.asarray(scores, dtype=np.float64))
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def logloss(pairs) -> float:
    """Mean negative log-likelihood; scores are clamped to [1e-7, 1-1e-7]."""
    total = 0.0
    n = 0
    for p, y in pairs:
        p = min(max(p, LOSS_CLAMP), 1.0 - LOSS_CLAMP)
        total += -math.log(p) if y else -math.log1p(-p)
        n += 1
    if n == 0:
        raise ContractError("logloss of an empty stream is undefined")
    return total / n


def rig(pairs) -> float:
    """Relative information gain: 1 - logloss / entropy(base rate)."""
    pairs = list(pairs)
    if not pairs:
        raise ContractError("rig of an empty stream is undefined")
    q = sum(y for _, y in pairs) / len(pairs)
    if q == 0.0 or q == 1.0:
        raise ContractError("rig needs both classes present")
    entropy = -(q * math.log(q) + (1.0 - q) * math.log(1.0 - q))
    return 1.0 - logloss(pairs) / entropy


class MetricWindow:
    """Bounded buffer of recent (score, label) pairs."""

    def __init__(self, capacity: int = 30000):
        if capacity < 2:
            raise ContractError("window capacity must be >= 2")
        self.capacity = capacity
        self._scores: list[float] = []
        self._labels: list[int] = []

    def __len__(self) -> int:
        return len(self._scores)

    @property
    def full(self) -> bool:
        return len(self._scores) >= self.capacity

    def add(self, score: float, label: int):
        self._scores.append(score)
        self._labels.append(label)

    def auc(self) -> float | None:
        if not self._scores:
            return None
        return window_auc(self._scores, self._labels)

    def clear(self):
        self._scores.clear()
        self._labels.clear()


def rolling_auc(pairs, window: int = 30000):
    """Yield (examples_seen, auc_or_None) per completed window.

    The index is the cumulative example count at window completion; None
    marks a single-class window that was skipped rather than scored.
    """
    buf = MetricWindow(window)
    seen = 0
    for score, label in pairs:
        buf.add(score, label)
        seen += 1
        if buf.full:
            yield seen, buf.auc()
            buf.clear()


class StreamingEvaluator:
    """Progressive-validation accumulator: log-loss plus a rolling AUC series."""

    def __init__(self, window: int = 30000):
        self.window = MetricWindow(window)
        self.auc_series: list[tuple[int, float | None]] = []
        self.count = 0
        self.loss_sum = 0.0

    def add(self, score: float, label: int):
        p = min(max(score, LOSS_CLAMP), 1.0 - LOSS_CLAMP)
        self.loss_sum += -math.log(p) if label else -math.log1p(-p)
        self.count += 1
        self.window.add(score, label)
        if self.window.full:
            self.auc_series.append((self.count, self.window.auc()))
            self.window.clear()

    @property
    def mean_logloss(self) -> float:
        return self.loss_sum / self.count if self.count else float("nan")


def format_metric_lines(series, final: dict[str, float], count: int):
    """Render the tab-separated metric stream consumed by harnesses."""
    lines = []
    for idx, auc in series:
        lines.append(f"{idx}\tauc\t{auc:.6f}" if auc is not None else f"{idx}\tauc\tnan")
    for name, value in final.items():
        lines.append(f"{count}\t{name}\t{value:.6f}")
    return lines
