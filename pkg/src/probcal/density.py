"""Density-ratio calibrators.

Both calibrators here estimate the class-conditional densities of the
score and combine them with the class priors through the posterior ratio

    p(x) = prior * q1(x) / (prior * q1(x) + (1 - prior) * q0(x)).

``KDECalibrator`` estimates q1/q0 by boxcar kernel density estimation with
per-class Silverman bandwidths; ``DPMCalibrator`` fits a truncated
stick-breaking mixture of Gaussians per class by coordinate-ascent
variational inference and uses its posterior-predictive density.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, digamma, gammaln
from scipy.stats import t as student_t

from ._validation import as_labels, as_scores, check_same_length, class_counts
from .base import BaseCalibrator

KDE_FORM_BAYES = "bayes"
KDE_FORM_PREFACTOR = "prefactor"
KDE_FORMS = (KDE_FORM_BAYES, KDE_FORM_PREFACTOR)

_SILVERMAN_FLOOR = 1e-3


def silverman_bandwidth(scores) -> float:
    """Rule-of-thumb bandwidth 1.06 * sd * count^(-1/5).

    Uses the unbiased standard deviation of the given scores. Identical
    scores would give bandwidth zero, which breaks the kernel sums, so a
    floor of 1e-3 applies in that case.
    """
    x = np.asarray(scores, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("scores must be one-dimensional")
    if x.size < 2:
        raise ValueError(f"bandwidth needs at least 2 scores, got {x.size}")
    if x.max() == x.min():
        # identical scores: the true sd is 0 even if np.std rounds above it
        return _SILVERMAN_FLOOR
    sd = float(np.std(x, ddof=1))
    h = 1.06 * sd * x.size ** (-0.2)
    return h if h > 0.0 else _SILVERMAN_FLOOR


class KDECalibrator(BaseCalibrator):
    """Boxcar-kernel density-ratio calibrator.

    The kernel K(u) = 1/2 on |u| <= 1 (boundary included) and 0 elsewhere.
    With S+ the kernel sum over positive training scores at bandwidth h1
    and S- over negatives at h0, the default form is

        p(x) = h0 * S+ / (h0 * S+ + h1 * S-)

    which is what Bayes' rule gives for KDE class-conditional densities
    with priors m/N, n/N, and reduces to the Nadaraya-Watson estimator
    S+/(S+ + S-) when the bandwidths are shared. form="prefactor" instead
    evaluates n*h0*S+ / (n*h0*S+ + m*h1*S-), kept for comparison; it
    agrees with the default only for balanced classes. An empty window
    (S+ = S- = 0) falls back to the positive-class prior.
    """

    def __init__(self, shared_bandwidth: bool = False, form: str = KDE_FORM_BAYES):
        self.shared_bandwidth = shared_bandwidth
        self.form = form
        self.positives_ = None
        self.negatives_ = None
        self.bandwidth_pos_ = None
        self.bandwidth_neg_ = None
        self.prior_ = None

    def fit(self, scores, labels) -> "KDECalibrator":
        if self.form not in KDE_FORMS:
            raise ValueError(f"form must be one of {KDE_FORMS}, got {self.form!r}")
        y = as_scores(scores)
        z = as_labels(labels)
        check_same_length(y, z)
        total, m, n_neg = class_counts(z)
        if m < 2 or n_neg < 2:
            raise ValueError(
                f"each class needs at least 2 samples, got {m} positive / {n_neg} negative"
            )
        positives = np.sort(y[z == 1])
        negatives = np.sort(y[z == 0])
        if self.shared_bandwidth:
            h = silverman_bandwidth(y)
            h1 = h0 = h
        else:
            h1 = silverman_bandwidth(positives)
            h0 = silverman_bandwidth(negatives)
        self.positives_ = positives
        self.negatives_ = negatives
        self.bandwidth_pos_ = h1
        self.bandwidth_neg_ = h0
        self.prior_ = m / total
        return self

    @staticmethod
    def _kernel_sum(sorted_points: np.ndarray, queries: np.ndarray, bandwidth: float) -> np.ndarray:
        # boxcar: 1/2 per training point within [x - h, x + h], both ends included
        lo = np.searchsorted(sorted_points, queries - bandwidth, side="left")
        hi = np.searchsorted(sorted_points, queries + bandwidth, side="right")
        return 0.5 * (hi - lo)

    def predict(self, scores):
        self._require_fitted("positives_")
        queries, scalar = self._prepare_queries(scores)
        s_pos = self._kernel_sum(self.positives_, queries, self.bandwidth_pos_)
        s_neg = self._kernel_sum(self.negatives_, queries, self.bandwidth_neg_)
        if self.form == KDE_FORM_PREFACTOR:
            numerator = len(self.negatives_) * self.bandwidth_neg_ * s_pos
            alternative = len(self.positives_) * self.bandwidth_pos_ * s_neg
        else:
            numerator = self.bandwidth_neg_ * s_pos
            alternative = self.bandwidth_pos_ * s_neg
        denominator = numerator + alternative
        with np.errstate(invalid="ignore"):
            out = np.where(denominator > 0.0, numerator / np.where(denominator > 0.0, denominator, 1.0), self.prior_)
        return self._finish(out, scalar)

    def to_dict(self) -> dict:
        self._require_fitted("positives_")
        return {
            "method": "kde",
            "form": self.form,
            "shared_bandwidth": bool(self.shared_bandwidth),
            "positives": [float(x) for x in self.positives_],
            "negatives": [float(x) for x in self.negatives_],
            "h0": float(self.bandwidth_neg_),
            "h1": float(self.bandwidth_pos_),
            "prior": float(self.prior_),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "KDECalibrator":
        model = cls(
            shared_bandwidth=bool(payload.get("shared_bandwidth", False)),
            form=payload.get("form", KDE_FORM_BAYES),
        )
        model.positives_ = np.sort(np.asarray(payload["positives"], dtype=np.float64))
        model.negatives_ = np.sort(np.asarray(payload["negatives"], dtype=np.float64))
        model.bandwidth_neg_ = float(payload["h0"])
        model.bandwidth_pos_ = float(payload["h1"])
        model.prior_ = float(payload["prior"])
        return model


@dataclass
class StickBreakingPosterior:
    """Variational posterior for one class's mixture density.

    Sticks hold the Beta(gamma1, gamma2) parameters for components
    1..T-1 (the last stick is fixed at 1 by truncation). Components hold
    Normal-Gamma posterior rows (mean, precision_scale, shape, rate). The
    posterior predictive is the expected-stick-weight mixture of the
    Student-t predictive of each component.
    """

    sticks: np.ndarray          # (T-1, 2)
    components: np.ndarray      # (T, 4): mean, precision_scale, shape, rate
    elbo: float
    elbo_history: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False

    def expected_weights(self) -> np.ndarray:
        t_count = self.components.shape[0]
        weights = np.empty(t_count)
        remaining = 1.0
        for idx in range(t_count - 1):
            g1, g2 = self.sticks[idx]
            ev = g1 / (g1 + g2)
            weights[idx] = remaining * ev
            remaining *= 1.0 - ev
        weights[t_count - 1] = remaining
        return weights

    def density(self, x: np.ndarray) -> np.ndarray:
        mean = self.components[:, 0]
        kappa = self.components[:, 1]
        shape = self.components[:, 2]
        rate = self.components[:, 3]
        df = 2.0 * shape
        scale = np.sqrt(rate * (kappa + 1.0) / (shape * kappa))
        pdf = student_t.pdf(np.asarray(x)[:, None], df[None, :], loc=mean[None, :], scale=scale[None, :])
        return pdf @ self.expected_weights()


def _fit_class_mixture(
    x: np.ndarray,
    truncation: int,
    alpha: float,
    max_iter: int,
    tol: float,
    rng: np.random.Generator,
) -> StickBreakingPosterior:
    n = x.size
    t_count = truncation
    mu0 = float(np.mean(x))
    kappa0 = 0.1
    a0 = 1.0
    # rate from the sample variance; floored so constant data stays proper
    b0 = max(float(np.var(x, ddof=1)), 1e-6)
    log_2pi = np.log(2.0 * np.pi)

    phi = rng.dirichlet(np.ones(t_count), size=n)

    x2 = x * x
    gamma = np.empty((t_count - 1, 2)) if t_count > 1 else np.empty((0, 2))
    elbo_history: list[float] = []
    previous = -np.inf
    converged = False
    iteration = 0

    for iteration in range(1, max_iter + 1):
        # global updates from the responsibilities
        counts = phi.sum(axis=0)
        sum_x = phi.T @ x
        sum_x2 = phi.T @ x2
        xbar = np.where(counts > 0, sum_x / np.maximum(counts, 1e-300), 0.0)
        scatter = np.maximum(sum_x2 - counts * xbar * xbar, 0.0)

        if t_count > 1:
            tail = np.concatenate([np.cumsum(counts[::-1])[-2::-1], [0.0]])
            gamma[:, 0] = 1.0 + counts[:-1]
            gamma[:, 1] = alpha + tail[:-1]
        kq = kappa0 + counts
        mq = (kappa0 * mu0 + sum_x) / kq
        aq = a0 + 0.5 * counts
        bq = b0 + 0.5 * (scatter + kappa0 * counts * (xbar - mu0) ** 2 / kq)

        # responsibility update from the globals
        if t_count > 1:
            digamma_total = digamma(gamma[:, 0] + gamma[:, 1])
            e_log_v = digamma(gamma[:, 0]) - digamma_total
            e_log_1mv = digamma(gamma[:, 1]) - digamma_total
            e_log_pi = np.concatenate([e_log_v, [0.0]])
            e_log_pi[1:] += np.cumsum(e_log_1mv)
        else:
            e_log_pi = np.zeros(1)
        e_lambda = aq / bq
        e_log_lambda = digamma(aq) - np.log(bq)
        quad = e_lambda[None, :] * (x[:, None] - mq[None, :]) ** 2 + 1.0 / kq[None, :]
        log_rho = e_log_pi[None, :] + 0.5 * e_log_lambda[None, :] - 0.5 * log_2pi - 0.5 * quad
        log_rho -= log_rho.max(axis=1, keepdims=True)
        phi = np.exp(log_rho)
        phi /= phi.sum(axis=1, keepdims=True)

        # evidence lower bound with all parameters current
        data_term = float(
            np.sum(phi * (e_log_pi[None, :] + 0.5 * e_log_lambda[None, :] - 0.5 * log_2pi - 0.5 * quad))
        )
        entropy = -float(np.sum(phi * np.log(np.maximum(phi, 1e-300))))
        if t_count > 1:
            stick_prior = float(
                np.sum(np.log(alpha) + (alpha - 1.0) * e_log_1mv)
            )
            stick_q = float(
                np.sum(
                    -betaln(gamma[:, 0], gamma[:, 1])
                    + (gamma[:, 0] - 1.0) * e_log_v
                    + (gamma[:, 1] - 1.0) * e_log_1mv
                )
            )
        else:
            stick_prior = stick_q = 0.0
        e_lambda_dev0 = e_lambda * (mq - mu0) ** 2 + 1.0 / kq
        component_prior = float(
            np.sum(
                0.5 * (np.log(kappa0) - log_2pi)
                + 0.5 * e_log_lambda
                - 0.5 * kappa0 * e_lambda_dev0
                + a0 * np.log(b0)
                - gammaln(a0)
                + (a0 - 1.0) * e_log_lambda
                - b0 * e_lambda
            )
        )
        component_q = float(
            np.sum(
                0.5 * (np.log(kq) - log_2pi)
                - 0.5
                + aq * np.log(bq)
                - gammaln(aq)
                + (aq - 0.5) * e_log_lambda
                - aq
            )
        )
        elbo = data_term + entropy + stick_prior - stick_q + component_prior - component_q
        if not np.isfinite(elbo):
            raise RuntimeError(f"evidence lower bound became non-finite at iteration {iteration}")
        elbo_history.append(elbo)
        if elbo - previous < tol and iteration > 1:
            converged = True
            break
        previous = elbo

    components = np.column_stack([mq, kq, aq, bq])
    return StickBreakingPosterior(
        sticks=gamma.copy(),
        components=components,
        elbo=elbo_history[-1],
        elbo_history=elbo_history,
        n_iter=iteration,
        converged=converged,
    )


class DPMCalibrator(BaseCalibrator):
    """Stick-breaking mixture calibrator fitted per class.

    Each class's score density is modeled as a truncated Dirichlet-process
    mixture of Gaussians with a Normal-Gamma base measure and fitted by
    coordinate-ascent variational inference. Responsibilities start from a
    seeded random assignment, so fits are reproducible bit for bit given
    the seed. Fitting stops when the evidence lower bound improves by less
    than ``tol`` or after ``max_iter`` sweeps.

    Prediction plugs the two posterior-predictive densities into the
    posterior ratio with the empirical positive prior; if both densities
    underflow to zero the prior is returned.
    """

    def __init__(
        self,
        truncation: int = 20,
        alpha: float = 1.0,
        max_iter: int = 500,
        tol: float = 1e-6,
        seed: int = 0,
    ):
        self.truncation = truncation
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed
        self.positive_ = None
        self.negative_ = None
        self.prior_ = None

    def fit(self, scores, labels) -> "DPMCalibrator":
        if self.truncation < 1:
            raise ValueError(f"truncation must be >= 1, got {self.truncation}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        y = as_scores(scores)
        z = as_labels(labels)
        check_same_length(y, z)
        total, m, n_neg = class_counts(z)
        if m < 2 or n_neg < 2:
            raise ValueError(
                f"each class needs at least 2 samples, got {m} positive / {n_neg} negative"
            )
        seed_pos, seed_neg = np.random.SeedSequence(self.seed).spawn(2)
        self.positive_ = _fit_class_mixture(
            y[z == 1], self.truncation, self.alpha, self.max_iter, self.tol,
            np.random.default_rng(seed_pos),
        )
        self.negative_ = _fit_class_mixture(
            y[z == 0], self.truncation, self.alpha, self.max_iter, self.tol,
            np.random.default_rng(seed_neg),
        )
        self.prior_ = m / total
        return self

    def predict(self, scores):
        self._require_fitted("positive_")
        queries, scalar = self._prepare_queries(scores)
        q1 = self.positive_.density(queries)
        q0 = self.negative_.density(queries)
        numerator = self.prior_ * q1
        denominator = numerator + (1.0 - self.prior_) * q0
        out = np.where(denominator > 0.0, numerator / np.where(denominator > 0.0, denominator, 1.0), self.prior_)
        return self._finish(out, scalar)

    @staticmethod
    def _class_payload(posterior: StickBreakingPosterior) -> dict:
        return {
            "sticks": [[float(a), float(b)] for a, b in posterior.sticks],
            "components": [[float(v) for v in row] for row in posterior.components],
            "elbo": float(posterior.elbo),
        }

    def to_dict(self) -> dict:
        self._require_fitted("positive_")
        return {
            "method": "dpm",
            "truncation": int(self.truncation),
            "alpha": float(self.alpha),
            "prior": float(self.prior_),
            "positive": self._class_payload(self.positive_),
            "negative": self._class_payload(self.negative_),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DPMCalibrator":
        model = cls(truncation=int(payload["truncation"]), alpha=float(payload["alpha"]))

        def rebuild(part: dict) -> StickBreakingPosterior:
            return StickBreakingPosterior(
                sticks=np.asarray(part["sticks"], dtype=np.float64).reshape(-1, 2),
                components=np.asarray(part["components"], dtype=np.float64).reshape(-1, 4),
                elbo=float(part["elbo"]),
            )

        model.positive_ = rebuild(payload["positive"])
        model.negative_ = rebuild(payload["negative"])
        model.prior_ = float(payload["prior"])
        return model
