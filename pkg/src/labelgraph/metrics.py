"""Micro/macro F1 and AUC for multilabel score matrices.

Micro metrics pool every (example, label) cell into one global count or
ranking; macro metrics compute per label and average. AUC is the
normalized Mann-Whitney statistic: the fraction of (positive, negative)
score pairs ranked correctly, ties counted as half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError


@dataclass
class PredictionSet:
    """Scores in (0, 1) with binary truths, plus the decision threshold."""
    scores: np.ndarray
    truths: np.ndarray
    threshold: float = 0.5

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.truths = np.asarray(self.truths)
        if self.scores.ndim != 2 or self.scores.shape != self.truths.shape:
            raise ValidationError(f"scores {self.scores.shape} and truths "
                                  f"{self.truths.shape} must be equal 2-D shapes")
        if not np.isin(self.truths, (0, 1)).all():
            raise ValidationError("truths must be 0/1")
        self.truths = self.truths.astype(np.int8)

    @property
    def num_labels(self) -> int:
        return self.scores.shape[1]

    def decisions(self) -> np.ndarray:
        # score equal to the threshold counts as positive
        return self.scores >= self.threshold


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0  # no positives anywhere: 0/0 defined as 0
    return 2 * tp / denom


def f1(preds: PredictionSet, averaging: str) -> float:
    if averaging not in ("micro", "macro"):
        raise DomainError(f"averaging must be 'micro' or 'macro', got {averaging!r}")
    if preds.scores.size == 0:
        raise DomainError("empty prediction set")
    dec = preds.decisions()
    truth = preds.truths.astype(bool)
    if averaging == "micro":
        tp = int(np.sum(dec & truth))
        fp = int(np.sum(dec & ~truth))
        fn = int(np.sum(~dec & truth))
        return _f1_from_counts(tp, fp, fn)
    per_label = []
    for c in range(preds.num_labels):
        tp = int(np.sum(dec[:, c] & truth[:, c]))
        fp = int(np.sum(dec[:, c] & ~truth[:, c]))
        fn = int(np.sum(~dec[:, c] & truth[:, c]))
        per_label.append(_f1_from_counts(tp, fp, fn))
    return float(np.mean(per_label))


def _pair_auc(scores: np.ndarray, truths: np.ndarray) -> float:
    """Exact pairwise comparison; quadratic, fine at this scale."""
    pos = scores[truths == 1]
    neg = scores[truths == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise DomainError("AUC needs at least one positive and one negative")
    wins = np.sum(pos[:, None] > neg[None, :])
    ties = np.sum(pos[:, None] == neg[None, :])
    return float((wins + 0.5 * ties) / (len(pos) * len(neg)))


def degenerate_labels(preds: PredictionSet) -> list:
    """Labels lacking a positive or a negative example; macro AUC skips them."""
    out = []
    for c in range(preds.num_labels):
        col = preds.truths[:, c]
        if col.min() == col.max():
            out.append(c)
    return out


def auc(preds: PredictionSet, averaging: str) -> float:
    if averaging not in ("micro", "macro"):
        raise DomainError(f"averaging must be 'micro' or 'macro', got {averaging!r}")
    if preds.scores.size == 0:
        raise DomainError("empty prediction set")
    if averaging == "micro":
        flat_truth = preds.truths.reshape(-1)
        if flat_truth.min() == flat_truth.max():
            raise DomainError("micro AUC undefined: pooled cells contain one class only")
        return _pair_auc(preds.scores.reshape(-1), flat_truth)
    skip = set(degenerate_labels(preds))
    values = [_pair_auc(preds.scores[:, c], preds.truths[:, c])
              for c in range(preds.num_labels) if c not in skip]
    if not values:
        raise DomainError("macro AUC undefined: every label has one class only")
    return float(np.mean(values))


def metrics_report(preds: PredictionSet) -> dict:
    """The standard report: F1 and AUC under both averagings, the threshold
    used, and how many degenerate labels the macro AUC skipped. Undefined
    AUCs are reported as null rather than failing the whole report."""
    report = {
        "m_f1": f1(preds, "micro"),
        "M_f1": f1(preds, "macro"),
        "threshold": preds.threshold,
        "skipped_labels": len(degenerate_labels(preds)),
    }
    for key, averaging in (("m_auc", "micro"), ("M_auc", "macro")):
        try:
            report[key] = auc(preds, averaging)
        except DomainError:
            report[key] = None
    return report


def per_label_rows(preds: PredictionSet) -> list:
    """Per-label breakdown for delimited output: (label, f1, auc, positives)."""
    dec = preds.decisions()
    truth = preds.truths.astype(bool)
    rows = []
    for c in range(preds.num_labels):
        tp = int(np.sum(dec[:, c] & truth[:, c]))
        fp = int(np.sum(dec[:, c] & ~truth[:, c]))
        fn = int(np.sum(~dec[:, c] & truth[:, c]))
        try:
            label_auc = _pair_auc(preds.scores[:, c], preds.truths[:, c])
        except DomainError:
            label_auc = None
        rows.append({"label": c, "f1": _f1_from_counts(tp, fp, fn),
                     "auc": label_auc, "positives": int(truth[:, c].sum())})
    return rows
