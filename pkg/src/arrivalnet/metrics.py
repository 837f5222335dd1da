"""Evaluation metrics: ROC-AUC, rMSE, the PHM08 asymmetric loss, AUC summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class QuantileSummary:
    min: float
    q25: float
    q50: float
    q75: float
    max: float
    mean: float

    def as_row(self):
        return [self.min, self.q25, self.q50, self.q75, self.max, self.mean]


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with midranks, so tied pairs earn half credit."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative label")
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def phm08_loss(d):
    """Asymmetric exponential penalty on ``d = predicted - actual``.

    Late predictions (``d > 0``) cost ``exp(d/10) - 1``; early ones cost
    ``exp(-d/13) - 1``.
    """
    d = np.asarray(d, dtype=float)
    out = np.where(d < 0, np.expm1(-d / 13.0), np.expm1(d / 10.0))
    return float(out) if out.ndim == 0 else out


def _diffs(predicted, actual):
    predicted = np.asarray(predicted, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if predicted.size == 0:
        raise ValueError("need at least one prediction")
    if predicted.shape != actual.shape:
        raise ValueError("predicted and actual must have the same length")
    return predicted - actual


def mean_custom_loss(predicted, actual) -> float:
    return float(np.mean(phm08_loss(_diffs(predicted, actual))))


def rmse(predicted, actual) -> float:
    return float(np.sqrt(np.mean(_diffs(predicted, actual) ** 2)))


def auc_quantile_summary(aucs) -> QuantileSummary:
    a = np.asarray(list(aucs), dtype=float)
    if a.size == 0:
        raise ValueError("need at least one AUC")
    q = np.quantile(a, [0.0, 0.25, 0.5, 0.75, 1.0])
    return QuantileSummary(*map(float, q), float(a.mean()))
