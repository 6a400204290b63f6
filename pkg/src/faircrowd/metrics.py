"""Demographic parity and accuracy measurements."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import GroupAssignment, LabelMatrix


@dataclass(frozen=True)
class FairnessReport:
    dp_gap: float
    rate_per_group: tuple
    f1: Optional[float] = None
    accuracy: Optional[float] = None

    @property
    def signed_gap(self) -> float:
        return self.rate_per_group[1] - self.rate_per_group[0]


def _groups(g):
    return g.group if isinstance(g, GroupAssignment) else np.asarray(g)


def group_rates(pred, g, weights=None) -> np.ndarray:
    """(P(pred=1 | A=0), P(pred=1 | A=1)); ``pred`` may hold probabilities."""
    pred = np.asarray(pred, dtype=float)
    group = _groups(g).astype(np.int64)
    w = np.ones_like(pred) if weights is None else np.asarray(weights, dtype=float)
    mass = np.bincount(group, weights=w, minlength=2)
    if mass[0] <= 0 or mass[1] <= 0:
        raise ValueError("both groups must be non-empty")
    return np.bincount(group, weights=w * pred, minlength=2) / mass


def dp_gap(pred, g, weights=None, truth=None) -> FairnessReport:
    """Global demographic parity gap |P(pred=1|A=1) - P(pred=1|A=0)|.

    Probabilities are averaged exactly, so a randomized classifier is
    scored in expectation. ``weights`` turns the tasks into a weighted
    population (used for exact fixtures). Supplying hard ``truth`` also
    fills in F1 and accuracy.
    """
    rates = group_rates(pred, g, weights)
    gap = float(abs(rates[1] - rates[0]))
    f1 = acc = None
    if truth is None and isinstance(g, GroupAssignment):
        truth = g.truth
    if truth is not None:
        pred_arr = np.asarray(pred)
        if np.all((pred_arr == 0) | (pred_arr == 1)):
            f1, acc = f1_accuracy(pred_arr, truth)
    return FairnessReport(gap, (float(rates[0]), float(rates[1])), f1, acc)


def annotator_dp_gaps(m: LabelMatrix, g: GroupAssignment) -> np.ndarray:
    """Per-annotator |mean vote on A=1 - mean vote on A=0|; NaN if an
    annotator has no vote in one of the groups."""
    rates = annotator_rates(m, g)
    return np.abs(rates[:, 1] - rates[:, 0])


def annotator_rates(m: LabelMatrix, g: GroupAssignment) -> np.ndarray:
    """``(n_annotators, 2)`` empirical P(vote=1 | A=a); NaN where unseen."""
    R = m.n_annotators
    cell = m.annotator * 2 + g.group[m.task]
    n = np.bincount(cell, minlength=2 * R).reshape(R, 2)
    ones = np.bincount(cell, weights=m.label, minlength=2 * R).reshape(R, 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, ones / np.maximum(n, 1), np.nan)


def f1_accuracy(pred, truth):
    """Binary F1 (positive class 1, 0 when undefined) and accuracy."""
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    tp = np.sum(pred & truth)
    fp = np.sum(pred & ~truth)
    fn = np.sum(~pred & truth)
    denom = 2 * tp + fp + fn
    f1 = 2.0 * tp / denom if denom > 0 else 0.0
    return float(f1), float(np.mean(pred == truth))
