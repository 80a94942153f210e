"""Histogram-binning calibration.

The calibrator partitions the score axis [0, 1] into bins, records the
fraction of positive training labels in each bin, and maps any query score
to its bin's positive fraction. Two partition schemes are supported:

* ``frequency``: the training scores are sorted and cut into groups whose
  sizes differ by at most one; interior edges sit at the midpoint between
  the adjacent boundary scores, so the fitted map is total on [0, 1].
* ``width``: edges at i/B regardless of the data.

Bins are right-open, except the last which is closed at 1. A query landing
in an empty bin is answered with the nearest nonempty bin's value (ties go
to the lower bin). ``plug_in_estimate`` recomputes the same answer through
the class-prior times likelihood-ratio route in exact rational arithmetic
and exists as an independent cross-check of ``predict``.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ._validation import as_labels, as_scores, check_same_length, class_counts
from .base import BaseCalibrator
from .metrics import SCHEME_FREQUENCY, SCHEME_WIDTH, SCHEMES


def default_bin_count(n_samples: int) -> int:
    """Cube-root rule: round(N^(1/3)) clamped to [1, N]."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    return int(min(max(round(n_samples ** (1.0 / 3.0)), 1), n_samples))


def _bin_indices(edges: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Right-open bin lookup; scores at 1 fall into the last bin."""
    idx = np.searchsorted(edges, scores, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def _nearest_nonempty(counts: np.ndarray) -> np.ndarray:
    """For every bin, the index of the nearest nonempty bin (ties -> lower)."""
    nonempty = np.flatnonzero(counts > 0)
    if nonempty.size == 0:
        raise ValueError("all bins are empty")
    fill = np.empty(len(counts), dtype=np.intp)
    for j in range(len(counts)):
        pos = np.searchsorted(nonempty, j)
        left = nonempty[pos - 1] if pos > 0 else None
        right = nonempty[pos] if pos < nonempty.size else None
        if left is None:
            fill[j] = right
        elif right is None:
            fill[j] = left
        else:
            fill[j] = left if (j - left) <= (right - j) else right
    return fill


class HistogramCalibrator(BaseCalibrator):
    """Map a score to the positive fraction of its training-score bin.

    Parameters
    ----------
    n_bins : int or None
        Number of bins B. None selects round(N^(1/3)) at fit time.
    scheme : str
        "frequency" (default) or "width".

    Notes
    -----
    Under the frequency scheme, tied scores spanning a tentative group
    boundary collapse that edge; the affected groups merge, so the fitted
    bin count can be smaller than requested and bin populations can then
    differ by more than one. With distinct scores the populations differ
    by at most one. Per-bin statistics always describe the assignment
    induced by the final edges, which keeps predict consistent with them.
    """

    def __init__(self, n_bins: int | None = None, scheme: str = SCHEME_FREQUENCY):
        self.n_bins = n_bins
        self.scheme = scheme
        self.edges_ = None
        self.counts_ = None
        self.positives_ = None
        self.theta_ = None
        self.weights_ = None
        self.n_bins_ = None
        self.n_ = None
        self.n_pos_ = None
        self.n_neg_ = None
        self._fill = None

    def fit(self, scores, labels) -> "HistogramCalibrator":
        y = as_scores(scores)
        z = as_labels(labels)
        check_same_length(y, z)
        n = y.size
        if n < 1:
            raise ValueError("need at least one sample")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        b = default_bin_count(n) if self.n_bins is None else int(self.n_bins)
        if not 1 <= b <= n:
            raise ValueError(f"n_bins must satisfy 1 <= B <= {n}, got {b}")

        if self.scheme == SCHEME_WIDTH:
            edges = np.linspace(0.0, 1.0, b + 1)
        else:
            ordered = y[np.argsort(y, kind="stable")]
            groups = np.array_split(np.arange(n), b)
            cuts = [0.0]
            for j in range(1, b):
                lo = ordered[groups[j - 1][-1]]
                hi = ordered[groups[j][0]]
                if hi <= lo:
                    continue  # tie spans the boundary: an edge here separates nothing
                midpoint = 0.5 * (lo + hi)
                if midpoint > cuts[-1]:
                    cuts.append(float(midpoint))
            if cuts[-1] < 1.0:
                cuts.append(1.0)
            else:
                # a midpoint landed exactly on 1; the final edge replaces it
                cuts[-1] = 1.0
            edges = np.asarray(cuts, dtype=np.float64)

        idx = _bin_indices(edges, y)
        n_bins = len(edges) - 1
        counts = np.bincount(idx, minlength=n_bins)
        positives = np.bincount(idx[z == 1], minlength=n_bins)
        with np.errstate(invalid="ignore"):
            theta = np.where(counts > 0, positives / np.maximum(counts, 1), np.nan)
        theta[counts == 0] = np.nan

        self.edges_ = edges
        self.counts_ = counts
        self.positives_ = positives
        self.theta_ = theta
        self.weights_ = counts / n
        self.n_bins_ = n_bins
        self.n_, self.n_pos_, self.n_neg_ = class_counts(z)
        self._fill = _nearest_nonempty(counts)
        return self

    def predict(self, scores):
        self._require_fitted("edges_")
        queries, scalar = self._prepare_queries(scores)
        idx = _bin_indices(self.edges_, queries)
        return self._finish(self.theta_[self._fill[idx]], scalar)

    def to_dict(self) -> dict:
        self._require_fitted("edges_")
        return {
            "method": "histogram",
            "scheme": self.scheme,
            "edges": [float(e) for e in self.edges_],
            "theta": [None if np.isnan(t) else float(t) for t in self.theta_],
            "counts": [int(c) for c in self.counts_],
            "positives": [int(c) for c in self.positives_],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "HistogramCalibrator":
        model = cls(n_bins=len(payload["counts"]), scheme=payload["scheme"])
        model.edges_ = np.asarray(payload["edges"], dtype=np.float64)
        model.counts_ = np.asarray(payload["counts"], dtype=np.int64)
        model.positives_ = np.asarray(payload["positives"], dtype=np.int64)
        model.theta_ = np.asarray(
            [np.nan if t is None else t for t in payload["theta"]], dtype=np.float64
        )
        model.n_bins_ = len(model.counts_)
        model.n_ = int(model.counts_.sum())
        model.n_pos_ = int(model.positives_.sum())
        model.n_neg_ = model.n_ - model.n_pos_
        model.weights_ = model.counts_ / model.n_ if model.n_ else model.counts_ * 0.0
        model._fill = _nearest_nonempty(model.counts_)
        return model


def plug_in_estimate(scores, labels, calibrator: HistogramCalibrator, query):
    """Calibrated probability via priors times histogram likelihoods.

    Evaluates prior(z) * density(score | z) for both classes, with the
    class-conditional densities estimated by histograms over the
    calibrator's bins, and returns the posterior for class 1. All
    arithmetic is exact (rational), so the result equals the correctly
    rounded value of the underlying ratio; algebraically it reduces to
    positives/count of the query's bin, which is what predict returns.

    Queries in empty bins mirror predict's nearest-nonempty redirect, since
    both class likelihoods vanish there.
    """
    y = as_scores(scores)
    z = as_labels(labels)
    check_same_length(y, z)
    calibrator._require_fitted("edges_")
    _, m, n_neg = class_counts(z)
    if m == 0 or n_neg == 0:
        raise ValueError("plug-in estimate needs both classes present")

    edges = calibrator.edges_
    n_bins = len(edges) - 1
    idx = _bin_indices(edges, y)
    bin_total = np.bincount(idx, minlength=n_bins)
    bin_pos = np.bincount(idx[z == 1], minlength=n_bins)
    fill = _nearest_nonempty(bin_total)

    queries, scalar = BaseCalibrator._prepare_queries(query)
    query_bins = fill[_bin_indices(edges, queries)]

    n_total = int(y.size)
    prior_pos = Fraction(m, n_total)
    prior_neg = Fraction(n_neg, n_total)
    out = np.empty(queries.size, dtype=np.float64)
    for k, j in enumerate(query_bins):
        width = Fraction(float(edges[j + 1])) - Fraction(float(edges[j]))
        m_j = int(bin_pos[j])
        n_j = int(bin_total[j]) - m_j
        likelihood_pos = Fraction(m_j, m) / width
        likelihood_neg = Fraction(n_j, n_neg) / width
        numerator = prior_pos * likelihood_pos
        denominator = numerator + prior_neg * likelihood_neg
        out[k] = float(numerator / denominator)
    return BaseCalibrator._finish(out, scalar)
