"""Monotone baseline calibrators: sigmoid (Platt) fitting and isotonic
regression by pooling adjacent violators.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import expit

from ._validation import as_labels, as_scores, check_same_length, class_counts
from .base import BaseCalibrator


def pool_adjacent_violators(values, weights=None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit of a real sequence.

    Scans left to right keeping a stack of blocks; whenever the last block's
    mean drops below its predecessor's, the two merge into their weighted
    mean. Returns the fitted value at every input position. O(N).
    """
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != y.shape:
            raise ValueError("weights must match values in length")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")

    # each block: [weighted sum, total weight, number of members]
    blocks: list[list[float]] = []
    for value, weight in zip(y, w):
        blocks.append([value * weight, weight, 1])
        while len(blocks) > 1:
            s1, w1, c1 = blocks[-2]
            s2, w2, c2 = blocks[-1]
            if s1 / w1 <= s2 / w2:
                break
            blocks.pop()
            blocks[-1] = [s1 + s2, w1 + w2, c1 + c2]
    out = np.empty_like(y)
    position = 0
    for s, w_total, count in blocks:
        out[position : position + count] = s / w_total
        position += count
    return out


class PlattCalibrator(BaseCalibrator):
    """Two-parameter sigmoid map p(f) = 1 / (1 + exp(slope * f + intercept)).

    Fitting minimizes the negative log-likelihood with the smoothed targets
    (m+1)/(m+2) for positives and 1/(n+2) for negatives, which regularizes
    the estimate away from hard 0/1 fits. Newton iterations with a
    backtracking line search; starts at slope 0, intercept log((n+1)/(m+1)).
    Non-convergence is reported as a warning, never silently.
    """

    def __init__(self, max_iter: int = 200, tol: float = 1e-8):
        self.max_iter = max_iter
        self.tol = tol
        self.slope_ = None
        self.intercept_ = None
        self.converged_ = None
        self.n_iter_ = None
        self.gradient_norm_ = None

    def fit(self, scores, labels) -> "PlattCalibrator":
        f = as_scores(scores)
        z = as_labels(labels)
        check_same_length(f, z)
        _, m, n_neg = class_counts(z)
        if m == 0 or n_neg == 0:
            raise ValueError("sigmoid fitting needs both classes present")

        target = np.where(z == 1, (m + 1.0) / (m + 2.0), 1.0 / (n_neg + 2.0))

        def objective(a, b):
            s = a * f + b
            # stable form of -sum t*log(p) + (1-t)*log(1-p) with p = expit(-s)
            return float(
                np.sum(np.where(s >= 0, target * s, (target - 1.0) * s))
                + np.sum(np.log1p(np.exp(-np.abs(s))))
            )

        a, b = 0.0, float(np.log((n_neg + 1.0) / (m + 1.0)))
        value = objective(a, b)
        converged = False
        gradient_norm = np.inf
        iteration = 0
        for iteration in range(1, self.max_iter + 1):
            s = a * f + b
            p = expit(-s)
            d = target - p
            gradient = np.array([np.dot(d, f), d.sum()])
            gradient_norm = float(np.abs(gradient).max())
            if gradient_norm < self.tol:
                converged = True
                break
            w = p * (1.0 - p)
            hessian = np.array(
                [
                    [np.dot(w, f * f) + 1e-12, np.dot(w, f)],
                    [np.dot(w, f), w.sum() + 1e-12],
                ]
            )
            step = np.linalg.solve(hessian, gradient)
            descent = float(np.dot(gradient, step))
            stepsize = 1.0
            while stepsize >= 2.0**-20:
                candidate = objective(a - stepsize * step[0], b - stepsize * step[1])
                if candidate <= value - 1e-4 * stepsize * descent:
                    break
                stepsize *= 0.5
            a -= stepsize * step[0]
            b -= stepsize * step[1]
            value = objective(a, b)
        else:
            iteration = self.max_iter

        if not converged:
            # re-check: the loop may exhaust right at the solution
            s = a * f + b
            d = target - expit(-s)
            gradient_norm = float(
                np.abs(np.array([np.dot(d, f), d.sum()])).max()
            )
            converged = gradient_norm < self.tol
        if not converged:
            warnings.warn(
                f"sigmoid fit stopped after {iteration} iterations with "
                f"gradient norm {gradient_norm:.3e} (tol {self.tol:.1e})",
                RuntimeWarning,
                stacklevel=2,
            )

        self.slope_ = float(a)
        self.intercept_ = float(b)
        self.converged_ = converged
        self.n_iter_ = iteration
        self.gradient_norm_ = gradient_norm
        return self

    def predict(self, scores):
        self._require_fitted("slope_")
        queries, scalar = self._prepare_queries(scores)
        return self._finish(expit(-(self.slope_ * queries + self.intercept_)), scalar)

    def to_dict(self) -> dict:
        self._require_fitted("slope_")
        return {"method": "platt", "A": self.slope_, "B": self.intercept_}

    @classmethod
    def from_dict(cls, payload: dict) -> "PlattCalibrator":
        model = cls()
        model.slope_ = float(payload["A"])
        model.intercept_ = float(payload["B"])
        model.converged_ = True
        return model


class IsotonicCalibrator(BaseCalibrator):
    """Step-function calibrator fitted by isotonic least squares.

    Training scores are sorted; exact ties are pooled into one weighted
    point with the mean label before the monotone fit, so the result is a
    well-defined function of the score. Prediction looks up the value of
    the greatest breakpoint at or below the query (clamping at both ends,
    no interpolation).
    """

    def __init__(self):
        self.breakpoints_ = None
        self.values_ = None

    def fit(self, scores, labels) -> "IsotonicCalibrator":
        y = as_scores(scores)
        z = as_labels(labels)
        check_same_length(y, z)
        if y.size == 0:
            raise ValueError("need at least one sample")
        order = np.argsort(y, kind="stable")
        y_sorted = y[order]
        z_sorted = z[order].astype(np.float64)
        distinct, start = np.unique(y_sorted, return_index=True)
        weights = np.diff(np.append(start, y_sorted.size)).astype(np.float64)
        means = np.add.reduceat(z_sorted, start) / weights
        self.breakpoints_ = distinct
        self.values_ = pool_adjacent_violators(means, weights)
        return self

    def predict(self, scores):
        self._require_fitted("breakpoints_")
        queries, scalar = self._prepare_queries(scores)
        idx = np.searchsorted(self.breakpoints_, queries, side="right") - 1
        idx = np.clip(idx, 0, len(self.breakpoints_) - 1)
        return self._finish(self.values_[idx], scalar)

    def to_dict(self) -> dict:
        self._require_fitted("breakpoints_")
        return {
            "method": "isotonic",
            "breakpoints": [float(x) for x in self.breakpoints_],
            "values": [float(v) for v in self.values_],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "IsotonicCalibrator":
        model = cls()
        model.breakpoints_ = np.asarray(payload["breakpoints"], dtype=np.float64)
        model.values_ = np.asarray(payload["values"], dtype=np.float64)
        return model
