"""Calibration and discrimination measures.

Reliability bins group predictions by value; per bin we track the mean
predicted probability, the observed fraction of positives, and the share of
all samples landing in the bin. ECE is the weighted average of the per-bin
gap |observed - predicted|, MCE the maximum gap over nonempty bins.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ._validation import as_labels, as_scores, check_same_length, class_counts

SCHEME_FREQUENCY = "frequency"
SCHEME_WIDTH = "width"
SCHEMES = (SCHEME_FREQUENCY, SCHEME_WIDTH)

DEFAULT_NUM_BINS = 10


@dataclass(frozen=True)
class ReliabilityBin:
    """Per-bin summary; mean_prediction/positive_fraction are NaN when empty."""

    index: int
    count: int
    mean_prediction: float
    positive_fraction: float
    weight: float

    @property
    def gap(self) -> float:
        return abs(self.positive_fraction - self.mean_prediction)


@dataclass(frozen=True)
class ReliabilityReport:
    bins: list[ReliabilityBin]
    ece: float
    mce: float
    rmse: float
    accuracy: float
    auc: float


def _check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}, got {scheme!r}")


def reliability(
    predictions,
    labels,
    num_bins: int = DEFAULT_NUM_BINS,
    scheme: str = SCHEME_FREQUENCY,
) -> list[ReliabilityBin]:
    """Assign each prediction to one of num_bins bins and summarize them.

    Equal-frequency bins sort the predictions (stable, so ties split by
    position) and cut the order into groups whose sizes differ by at most
    one. Equal-width bins cut [0, 1] at i/num_bins; they are right-open with
    the last closed at 1 and may be empty.
    """
    p = as_scores(predictions, "predictions")
    z = as_labels(labels)
    check_same_length(p, z, "predictions and labels")
    if p.size == 0:
        raise ValueError("cannot bin an empty prediction list")
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    _check_scheme(scheme)

    n = p.size
    if scheme == SCHEME_FREQUENCY:
        order = np.argsort(p, kind="stable")
        groups = np.array_split(order, num_bins)
        members = [g for g in groups]
    else:
        edges = np.linspace(0.0, 1.0, num_bins + 1)
        idx = np.clip(np.searchsorted(edges, p, side="right") - 1, 0, num_bins - 1)
        members = [np.flatnonzero(idx == j) for j in range(num_bins)]

    bins = []
    for j, idx in enumerate(members):
        count = int(idx.size)
        if count == 0:
            bins.append(ReliabilityBin(j, 0, math.nan, math.nan, 0.0))
            continue
        bins.append(
            ReliabilityBin(
                index=j,
                count=count,
                mean_prediction=float(p[idx].mean()),
                positive_fraction=float(z[idx].mean()),
                weight=count / n,
            )
        )
    return bins


def ece(bins: list[ReliabilityBin]) -> float:
    """Expected calibration error: sum of weight * |observed - predicted|.

    Empty bins carry zero weight and contribute nothing; an empty bin list
    yields 0 by convention.
    """
    return float(sum(b.weight * b.gap for b in bins if b.count > 0))


def mce(bins: list[ReliabilityBin]) -> float:
    """Maximum calibration error: the largest per-bin gap over nonempty bins."""
    gaps = [b.gap for b in bins if b.count > 0]
    return float(max(gaps)) if gaps else 0.0


def auc(scores, labels) -> float:
    """Empirical AUC with the tie convention: ties count one half.

    Equals (1/(m*n)) * sum over positive-negative pairs of
    I(score_pos > score_neg) + 0.5 * I(score_pos == score_neg),
    computed via midranks in O(N log N).
    """
    y = as_scores(scores, "scores")
    z = as_labels(labels)
    check_same_length(y, z)
    _, m, n_neg = class_counts(z)
    if m == 0 or n_neg == 0:
        raise ValueError("AUC is undefined without both classes present")
    ranks = rankdata(y, method="average")
    positive_rank_sum = float(ranks[z == 1].sum())
    return (positive_rank_sum - m * (m + 1) / 2.0) / (m * n_neg)


def rmse(predictions, labels) -> float:
    """Root mean squared error between predictions and 0/1 labels."""
    p = as_scores(predictions, "predictions")
    z = as_labels(labels)
    check_same_length(p, z, "predictions and labels")
    if p.size == 0:
        raise ValueError("rmse of an empty list is undefined")
    return float(np.sqrt(np.mean((p - z) ** 2)))


def accuracy(predictions, labels, threshold: float = 0.5) -> float:
    """Fraction of samples where (prediction >= threshold) matches the label."""
    p = as_scores(predictions, "predictions")
    z = as_labels(labels)
    check_same_length(p, z, "predictions and labels")
    if p.size == 0:
        raise ValueError("accuracy of an empty list is undefined")
    return float(np.mean((p >= threshold).astype(np.int64) == z))


def evaluate(
    predictions,
    labels,
    num_bins: int = DEFAULT_NUM_BINS,
    scheme: str = SCHEME_FREQUENCY,
    threshold: float = 0.5,
) -> ReliabilityReport:
    """All five measures (RMSE, AUC, accuracy, MCE, ECE) plus the bins."""
    bins = reliability(predictions, labels, num_bins=num_bins, scheme=scheme)
    return ReliabilityReport(
        bins=bins,
        ece=ece(bins),
        mce=mce(bins),
        rmse=rmse(predictions, labels),
        accuracy=accuracy(predictions, labels, threshold=threshold),
        auc=auc(predictions, labels),
    )


def write_reliability_csv(bins: list[ReliabilityBin], path) -> None:
    """Export bins for external plotting of the reliability curve."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bin_index", "mean_prediction", "positive_fraction", "weight", "count"])
        for b in bins:
            writer.writerow(
                [
                    b.index,
                    format(b.mean_prediction, ".17g"),
                    format(b.positive_fraction, ".17g"),
                    format(b.weight, ".17g"),
                    b.count,
                ]
            )
