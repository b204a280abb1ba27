"""Evaluation metrics with deterministic tie handling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats


@dataclass(frozen=True)
class MetricReport:
    name: str
    mean: float
    std: float
    runs: int

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("a report needs at least one run")
        if self.std < 0:
            raise ValueError("standard deviation cannot be negative")

    def __str__(self) -> str:
        return f"{self.name}: {self.mean:.4f} +/- {self.std:.4f} ({self.runs} runs)"


def accuracy(logits, labels, mask) -> float:
    """Fraction of masked rows whose argmax logit hits the label.

    np.argmax already breaks ties toward the lowest class index, which is
    the documented convention.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    mask = np.asarray(mask)
    if mask.dtype == bool:
        idx = np.flatnonzero(mask)
    else:
        idx = mask.astype(np.intp)
    if idx.size == 0:
        raise ValueError("empty mask: nothing to score")
    predictions = np.argmax(logits[idx], axis=1)
    return float(np.mean(predictions == labels[idx]))


def roc_auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC; tied scores get average ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes present")
    ranks = scipy.stats.rankdata(scores, method="average")
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def aggregate_runs(values, name: str = "metric") -> MetricReport:
    """Mean and population standard deviation over per-run metrics."""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size == 0:
        raise ValueError("no runs to aggregate")
    return MetricReport(
        name=name, mean=float(values.mean()), std=float(values.std()), runs=values.size
    )
