"""Binary classification metrics and classifier agreement.

Labels are always -1/+1 with +1 as the positive class.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def _as_labels(seq, name: str) -> np.ndarray:
    arr = np.asarray(seq)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty 1-d label sequence")
    if not np.all(np.isin(arr, (-1, 1))):
        raise InputError(f"{name} contains labels outside {{-1, +1}}")
    return arr.astype(np.int64)


def confusion(predicted, truth) -> ConfusionCounts:
    """Count tp/tn/fp/fn with +1 as the positive class."""
    pred = _as_labels(predicted, "predicted")
    true = _as_labels(truth, "truth")
    if pred.shape != true.shape:
        raise InputError(f"length mismatch: {pred.size} predictions vs {true.size} truths")
    pos = true == 1
    hit = pred == true
    return ConfusionCounts(
        tp=int(np.sum(hit & pos)),
        tn=int(np.sum(hit & ~pos)),
        fp=int(np.sum(~hit & ~pos)),
        fn=int(np.sum(~hit & pos)),
    )


def accuracy(c: ConfusionCounts) -> float:
    """Fraction of correctly classified observations."""
    if c.total < 1:
        raise InputError("accuracy of an empty confusion table is undefined")
    return (c.tp + c.tn) / c.total


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient in [-1, 1].

    Returns 0 when any marginal is empty (the coefficient is undefined
    there; 0 matches the "no better than random" reading).
    """
    if c.total < 1:
        raise InputError("mcc of an empty confusion table is undefined")
    denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if denom == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(denom)


def umcc(mcc_value: float) -> float:
    """Rescale an MCC from [-1, 1] onto [0, 1]."""
    if not -1.0 - 1e-12 <= mcc_value <= 1.0 + 1e-12:
        raise InputError(f"mcc value {mcc_value} outside [-1, 1]")
    return (mcc_value + 1.0) / 2.0


def agreement(pred_i, pred_j) -> float:
    """Fraction of points on which two classifiers emit the same label."""
    a = _as_labels(pred_i, "pred_i")
    b = _as_labels(pred_j, "pred_j")
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.mean(a == b))


def mean_pairwise_agreement(base_predictions) -> float:
    """Mean agreement over all unordered pairs of B prediction sequences.

    Accepts a (B, n) array of -1/+1 votes.  Uses the per-point identity
    #agreeing-pairs = C(c+, 2) + C(c-, 2), which is exact and O(B n).
    """
    votes = np.asarray(base_predictions)
    if votes.ndim != 2 or votes.shape[0] < 2 or votes.shape[1] < 1:
        raise InputError("need at least 2 prediction sequences of equal nonzero length")
    if not np.all(np.isin(votes, (-1, 1))):
        raise InputError("predictions contain labels outside {-1, +1}")
    b, n = votes.shape
    c_pos = np.sum(votes == 1, axis=0).astype(np.int64)
    c_neg = b - c_pos
    agreeing = c_pos * (c_pos - 1) // 2 + c_neg * (c_neg - 1) // 2
    return float(np.sum(agreeing) / (n * (b * (b - 1) // 2)))
