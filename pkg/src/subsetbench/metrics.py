"""Selection-quality metrics and tuning-grid evaluation.

All metrics derive from the confusion counts of a selected support against
the true support. F-scores are computed as single divisions of integer
combinations (exact up to one IEEE rounding), and undefined denominators
follow a fixed convention: value 0 with defined=False.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .enet import RegularizationPath
from .model import Method, SelectionResult, TuningRecord


class Metric(str, enum.Enum):
    F1 = "F1"
    F2 = "F2"
    MCC = "MCC"
    PRECISION = "PRECISION"
    RECALL = "RECALL"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def p(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricScore:
    metric: Metric
    value: float
    defined: bool = True


def confusion(selected, truth, p: int) -> ConfusionCounts:
    """Count TP/FP/FN/TN of a selected support against the truth."""
    selected = frozenset(int(j) for j in selected)
    truth = frozenset(int(j) for j in truth)
    for support in (selected, truth):
        if any(j < 1 or j > p for j in support):
            raise ValueError("support indices must lie in 1..p")
    tp = len(selected & truth)
    fp = len(selected - truth)
    fn = len(truth - selected)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=p - tp - fp - fn)


def _fbeta(counts: ConfusionCounts, beta_sq: int) -> MetricScore:
    kind = Metric.F1 if beta_sq == 1 else Metric.F2
    if counts.tp + counts.fp == 0 or counts.tp + counts.fn == 0:
        return MetricScore(kind, 0.0, defined=False)
    # precision + recall == 0: tp == 0 with both fp > 0 and fn > 0
    if counts.tp == 0 and counts.fp > 0 and counts.fn > 0:
        return MetricScore(kind, 0.0, defined=False)
    num = (1 + beta_sq) * counts.tp
    return MetricScore(kind, num / (num + beta_sq * counts.fn + counts.fp))


def score(counts: ConfusionCounts, metric: Metric) -> MetricScore:
    """Evaluate one metric on confusion counts.

    F1 = 2PR/(P+R) and F2 = 5PR/(4P+R) are evaluated through their
    integer-count identities; MCC is the standard four-factor formula.
    A vanishing denominator yields value 0 with defined=False.
    """
    metric = Metric(metric)
    if metric is Metric.PRECISION:
        denom = counts.tp + counts.fp
        if denom == 0:
            return MetricScore(metric, 0.0, defined=False)
        return MetricScore(metric, counts.tp / denom)
    if metric is Metric.RECALL:
        denom = counts.tp + counts.fn
        if denom == 0:
            return MetricScore(metric, 0.0, defined=False)
        return MetricScore(metric, counts.tp / denom)
    if metric is Metric.F1:
        return _fbeta(counts, 1)
    if metric is Metric.F2:
        return _fbeta(counts, 4)
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    denom_sq = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom_sq == 0:
        return MetricScore(Metric.MCC, 0.0, defined=False)
    return MetricScore(Metric.MCC, (tp * tn - fp * fn) / math.sqrt(denom_sq))


Candidate = Union[SelectionResult, RegularizationPath]


def _iter_candidates(candidates: Iterable[Candidate]):
    """Yield (support, tuning) pairs in deterministic enumeration order."""
    for cand in candidates:
        if isinstance(cand, RegularizationPath):
            for lam, supp in zip(cand.lambdas, cand.supports):
                yield supp, TuningRecord(alpha=cand.alpha, lam=float(lam))
        else:
            yield cand.support, cand.tuning


def best_possible(
    candidates: Sequence[Candidate],
    truth,
    p: int,
    metric: Metric = Metric.F1,
):
    """Best achievable score over every candidate support.

    Scans all tuning points (every lambda of every path, every subset-size
    result) and returns (MetricScore, TuningRecord, ConfusionCounts) of the
    maximum. Ties prefer sparser supports, then earlier enumeration order.
    """
    metric = Metric(metric)
    best = None
    for supp, tuning in _iter_candidates(candidates):
        counts = confusion(supp, truth, p)
        sc = score(counts, metric)
        key = (sc.value, -len(supp))
        if best is None or key > best[0]:
            best = (key, sc, tuning, counts)
    if best is None:
        raise ValueError("candidate list is empty")
    return best[1], best[2], best[3]


def tune_to_subset_size(path: RegularizationPath, k: int) -> SelectionResult:
    """Pick the path point whose support size is (nearest to) k.

    Exact matches win; otherwise the closest size, preferring the sparser
    side and then the larger lambda. The realized size is len(support) of
    the returned result.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    best_idx = None
    best_key = None
    for i, supp in enumerate(path.supports):
        size = len(supp)
        key = (abs(size - k), 0 if size <= k else 1, i)
        if best_key is None or key < best_key:
            best_key = key
            best_idx = i
    method = Method.LASSO if path.alpha == 1.0 else Method.ENET
    return SelectionResult(
        method=method,
        support=path.supports[best_idx],
        coefficients=path.coefficients[best_idx],
        tuning=TuningRecord(alpha=path.alpha, lam=float(path.lambdas[best_idx])),
    )
