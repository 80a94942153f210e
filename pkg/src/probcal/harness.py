"""Monte-Carlo verification of the calibration-error guarantees.

Each ``verify_*`` routine repeatedly draws fresh calibration data from a
known oracle, fits the histogram calibrator, measures calibration error on
a large held-out test set, and compares against the closed-form guarantee:

* ``verify_mce_bound``:    MCE <= sqrt(2 B log(2B/delta) / N) with
                           probability at least 1 - delta.
* ``verify_ece_rate``:     mean ECE shrinks like sqrt(B/N); the log-log
                           slope against N should sit near -1/2.
* ``verify_auc_loss``:     ranking power lost to binning is at most 1/(2B)
                           on average.
* ``verify_theta_concentration``: per-bin positive-rate estimates obey the
                           Hoeffding tail 2 exp(-2 N eps^2 / B).
* ``calibration_size_sweep``: more calibration data gives non-increasing
                           MCE and ECE.

All routines derive one independent random stream per trial from the
master seed via spawn keys, so results are reproducible bit for bit
regardless of execution order or thread count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .binning import HistogramCalibrator
from .metrics import SCHEME_FREQUENCY, auc, ece, mce, reliability
from .synth import OracleSpec, generate_oracle, true_theta

DEFAULT_MIN_TEST = 100_000


@dataclass(frozen=True)
class TrialReport:
    """Measured quantities for one Monte-Carlo trial."""

    trial: int
    n_cal: int
    n_bins: int
    mce: float
    ece: float
    auc_raw: float | None = None
    auc_calibrated: float | None = None
    auc_loss: float | None = None
    mce_bound: float | None = None
    max_theta_error: float | None = None


@dataclass(frozen=True)
class Assertion:
    name: str
    passed: bool
    observed: float
    limit: float


@dataclass(frozen=True)
class SweepPoint:
    axis_value: float
    reports: tuple
    summary: dict


@dataclass
class SweepReport:
    axis_name: str
    points: list
    assertions: list
    slope: float | None = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)


def mce_bound(n_cal: int, n_bins: int, delta: float) -> float:
    """Closed-form high-probability MCE bound sqrt(2B log(2B/delta) / N)."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return math.sqrt(2.0 * n_bins * math.log(2.0 * n_bins / delta) / n_cal)


def hoeffding_bound(epsilon: float, n_cal: int, n_bins: int) -> float:
    """Tail bound 2 exp(-2 N eps^2 / B) on a per-bin positive-rate error."""
    return 2.0 * math.exp(-2.0 * n_cal * epsilon * epsilon / n_bins)


def default_test_size(n_cal: int) -> int:
    return max(10 * n_cal, DEFAULT_MIN_TEST)


def _rng_pair(seed: int, *path: int):
    """Two independent deterministic streams addressed by (seed, path)."""
    root = np.random.SeedSequence(seed, spawn_key=tuple(path))
    return root.spawn(2)


def _safe_auc(scores, labels):
    try:
        return auc(scores, labels)
    except ValueError:
        return None


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size < 2:
        return float(arr.mean()) if arr.size else math.nan, 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


def _calibration_trial(
    trial: int,
    cal_data,
    test_data,
    n_bins: int | None,
    bound: float | None = None,
    metric_bins: int | None = None,
) -> TrialReport:
    model = HistogramCalibrator(n_bins=n_bins).fit(cal_data.scores, cal_data.labels)
    calibrated = model.predict(test_data.scores)
    bins = reliability(
        calibrated,
        test_data.labels,
        num_bins=metric_bins if metric_bins is not None else model.n_bins_,
        scheme=SCHEME_FREQUENCY,
    )
    raw_auc = _safe_auc(test_data.scores, test_data.labels)
    cal_auc = _safe_auc(calibrated, test_data.labels)
    loss = raw_auc - cal_auc if raw_auc is not None and cal_auc is not None else None
    return TrialReport(
        trial=trial,
        n_cal=len(cal_data),
        n_bins=model.n_bins_,
        mce=mce(bins),
        ece=ece(bins),
        auc_raw=raw_auc,
        auc_calibrated=cal_auc,
        auc_loss=loss,
        mce_bound=bound,
    )


def verify_mce_bound(
    spec: OracleSpec,
    n_cal: int = 1000,
    n_bins: int = 10,
    delta: float = 0.05,
    trials: int = 200,
    n_test: int | None = None,
    seed: int = 0,
) -> SweepReport:
    """Check the high-probability MCE bound on fresh data.

    Each trial fits on a fresh calibration set of size ``n_cal`` and
    measures MCE on a fresh test set (default max(10 N, 1e5) samples).
    The guarantee is probabilistic, so the assertion is on the fraction
    of trials within the bound, which must reach 1 - delta. At least ~50
    trials are needed for that fraction to be meaningful.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_test = default_test_size(n_cal) if n_test is None else n_test
    bound = mce_bound(n_cal, n_bins, delta)
    reports = []
    one_class_trials = 0
    for t in range(trials):
        cal_ss, test_ss = _rng_pair(seed, t)
        cal = generate_oracle(spec, n_cal, cal_ss)
        test = generate_oracle(spec, n_test, test_ss)
        report = _calibration_trial(t, cal, test, n_bins, bound=bound)
        if report.auc_raw is None:
            one_class_trials += 1
        reports.append(report)
    within = float(np.mean([r.mce <= bound for r in reports]))
    mean_mce, std_mce = _mean_std([r.mce for r in reports])
    mean_ece, std_ece = _mean_std([r.ece for r in reports])
    point = SweepPoint(
        axis_value=float(n_cal),
        reports=tuple(reports),
        summary={
            "n_cal": float(n_cal),
            "n_bins": float(n_bins),
            "delta": delta,
            "mce_bound": bound,
            "fraction_within_bound": within,
            "mean_mce": mean_mce,
            "std_mce": std_mce,
            "mean_ece": mean_ece,
            "std_ece": std_ece,
        },
    )
    result = SweepReport(
        axis_name="n_cal",
        points=[point],
        assertions=[
            Assertion(
                name=f"fraction of trials with MCE <= {bound:.6g} reaches {1 - delta:g}",
                passed=within >= 1.0 - delta,
                observed=within,
                limit=1.0 - delta,
            )
        ],
    )
    if one_class_trials:
        result.notes.append(
            f"{one_class_trials}/{trials} trials had one-class test data; AUC skipped there"
        )
    return result


def verify_ece_rate(
    spec: OracleSpec,
    n_bins: int = 10,
    n_grid: Sequence[int] = (1_000, 10_000, 100_000),
    trials: int = 50,
    seed: int = 0,
    slope_window: tuple = (-0.65, -0.35),
) -> SweepReport:
    """Fit the log-log slope of mean ECE against calibration size.

    A sqrt(B/N) decay shows up as slope -1/2; the acceptance window is
    wide enough for Monte-Carlo noise. The size grid must span at least
    two decades for the slope to mean anything.
    """
    sizes = sorted(int(n) for n in n_grid)
    if len(sizes) < 2 or sizes[0] < 1:
        raise ValueError("n_grid needs at least two positive sizes")
    if sizes[-1] < 100 * sizes[0]:
        raise ValueError("n_grid must span at least two decades")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    points = []
    for grid_index, n_cal in enumerate(sizes):
        n_test = default_test_size(n_cal)
        reports = []
        for t in range(trials):
            cal_ss, test_ss = _rng_pair(seed, grid_index, t)
            cal = generate_oracle(spec, n_cal, cal_ss)
            test = generate_oracle(spec, n_test, test_ss)
            reports.append(_calibration_trial(t, cal, test, n_bins))
        mean_ece, std_ece = _mean_std([r.ece for r in reports])
        mean_mce, std_mce = _mean_std([r.mce for r in reports])
        points.append(
            SweepPoint(
                axis_value=float(n_cal),
                reports=tuple(reports),
                summary={
                    "n_cal": float(n_cal),
                    "mean_ece": mean_ece,
                    "std_ece": std_ece,
                    "mean_mce": mean_mce,
                    "std_mce": std_mce,
                },
            )
        )
    log_n = np.log([p.axis_value for p in points])
    log_e = np.log([p.summary["mean_ece"] for p in points])
    slope = float(np.polyfit(log_n, log_e, 1)[0])
    low, high = slope_window
    return SweepReport(
        axis_name="n_cal",
        points=points,
        slope=slope,
        assertions=[
            Assertion(
                name=f"log-log ECE slope within [{low:g}, {high:g}]",
                passed=low <= slope <= high,
                observed=slope,
                limit=high,
            )
        ],
    )


def verify_auc_loss(
    spec: OracleSpec,
    n_cal: int = 100_000,
    bin_grid: Sequence[int] = (5, 10, 20, 50),
    trials: int = 20,
    seed: int = 0,
) -> SweepReport:
    """Check that binning costs at most 1/(2B) of AUC on average.

    Requires B <= sqrt(N): with more bins than that, bins hold so few
    samples that the calibrated scores are dominated by noise, a regime
    the average-loss guarantee does not cover. Negative losses (AUC
    gained) are possible and simply reported.
    """
    bins_sorted = sorted(int(b) for b in bin_grid)
    if bins_sorted[0] < 1:
        raise ValueError("bin counts must be >= 1")
    if bins_sorted[-1] > math.isqrt(n_cal):
        raise ValueError(
            f"bin count {bins_sorted[-1]} exceeds sqrt(n_cal) = {math.isqrt(n_cal)}; "
            "per-bin noise would swamp the average-loss guarantee"
        )
    if trials < 2:
        raise ValueError("trials must be >= 2 for a standard error")
    n_test = default_test_size(n_cal)
    points = []
    assertions = []
    for grid_index, b in enumerate(bins_sorted):
        reports = []
        for t in range(trials):
            cal_ss, test_ss = _rng_pair(seed, grid_index, t)
            cal = generate_oracle(spec, n_cal, cal_ss)
            test = generate_oracle(spec, n_test, test_ss)
            reports.append(_calibration_trial(t, cal, test, b))
        losses = [r.auc_loss for r in reports if r.auc_loss is not None]
        if not losses:
            raise RuntimeError("no trial produced a defined AUC; oracle is degenerate")
        mean_loss, std_loss = _mean_std(losses)
        stderr = std_loss / math.sqrt(len(losses))
        limit = 1.0 / (2.0 * b) + 3.0 * stderr
        raw_values = [r.auc_raw for r in reports if r.auc_raw is not None]
        cal_values = [r.auc_calibrated for r in reports if r.auc_calibrated is not None]
        points.append(
            SweepPoint(
                axis_value=float(b),
                reports=tuple(reports),
                summary={
                    "n_bins": float(b),
                    "mean_auc_loss": mean_loss,
                    "std_auc_loss": std_loss,
                    "stderr_auc_loss": stderr,
                    "loss_limit": limit,
                    "mean_auc_raw": float(np.mean(raw_values)),
                    "mean_auc_calibrated": float(np.mean(cal_values)),
                },
            )
        )
        assertions.append(
            Assertion(
                name=f"mean AUC loss at B={b} within 1/(2B) + 3*SE",
                passed=mean_loss <= limit,
                observed=mean_loss,
                limit=limit,
            )
        )
    return SweepReport(axis_name="n_bins", points=points, assertions=assertions)


def verify_theta_concentration(
    spec: OracleSpec,
    n_cal: int = 10_000,
    n_bins: int = 10,
    epsilon_grid: Sequence[float] = (0.01, 0.02, 0.05, 0.1),
    trials: int = 500,
    seed: int = 0,
) -> SweepReport:
    """Compare per-bin positive-rate errors against the Hoeffding tail.

    Each trial fits bins on fresh data; the limit rates come from
    integrating the truth curve over that trial's bins. Exceedance
    frequencies are pooled over trials and bins. A second assertion
    checks the estimates are centered: per-bin mean deviation within
    three standard errors of zero.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    epsilons = sorted(float(e) for e in epsilon_grid)
    if not epsilons or epsilons[0] <= 0:
        raise ValueError("epsilon_grid must contain positive values")
    deviations = np.empty((trials, n_bins))
    reports = []
    for t in range(trials):
        (cal_ss,) = np.random.SeedSequence(seed, spawn_key=(t,)).spawn(1)
        cal = generate_oracle(spec, n_cal, cal_ss)
        model = HistogramCalibrator(n_bins=n_bins).fit(cal.scores, cal.labels)
        if model.n_bins_ != n_bins or np.isnan(model.theta_).any():
            raise RuntimeError(
                "degenerate binning (tied scores); concentration check "
                "expects continuous score data"
            )
        limits = true_theta(spec, model.edges_)
        deviations[t] = model.theta_ - limits
        reports.append(
            TrialReport(
                trial=t,
                n_cal=n_cal,
                n_bins=n_bins,
                mce=math.nan,
                ece=math.nan,
                max_theta_error=float(np.abs(deviations[t]).max()),
            )
        )
    absolute = np.abs(deviations)
    points = []
    assertions = []
    for eps in epsilons:
        bound = hoeffding_bound(eps, n_cal, n_bins)
        frequency = float(np.mean(absolute >= eps))
        points.append(
            SweepPoint(
                axis_value=eps,
                reports=tuple(reports) if eps == epsilons[0] else (),
                summary={
                    "epsilon": eps,
                    "exceedance_frequency": frequency,
                    "hoeffding_bound": bound,
                },
            )
        )
        assertions.append(
            Assertion(
                name=f"exceedance frequency at eps={eps:g} within Hoeffding bound",
                passed=frequency <= bound,
                observed=frequency,
                limit=bound,
            )
        )
    per_bin_mean = deviations.mean(axis=0)
    per_bin_se = deviations.std(axis=0, ddof=1) / math.sqrt(trials)
    worst = float(np.max(np.abs(per_bin_mean) / per_bin_se))
    assertions.append(
        Assertion(
            name="per-bin mean deviation within 3 standard errors of zero",
            passed=worst <= 3.0,
            observed=worst,
            limit=3.0,
        )
    )
    return SweepReport(axis_name="epsilon", points=points, assertions=assertions)


def oracle_generator(spec: OracleSpec) -> Callable:
    """Adapter: a (size, seed) -> ScoredDataset generator for the sweep."""

    def generate(n: int, seed) -> object:
        return generate_oracle(spec, n, seed)

    return generate


def calibration_size_sweep(
    data_generator: Callable,
    sizes: Sequence[int] = (100, 1_000, 10_000),
    trials: int = 10,
    seed: int = 0,
    n_test: int = DEFAULT_MIN_TEST,
    n_bins: int | None = None,
    metric_bins: int = 10,
) -> SweepReport:
    """Measure MCE/ECE/AUC as the calibration set grows.

    ``data_generator(n, seed)`` must return a ScoredDataset. The bin count
    defaults to the cube-root rule per size. Mean MCE and ECE must be
    non-increasing along the size axis; a single adjacent inversion is
    tolerated if it stays within one standard error of the difference.
    """
    size_list = [int(s) for s in sizes]
    if size_list != sorted(size_list):
        raise ValueError("sizes must be ascending")
    if len(size_list) < 2:
        raise ValueError("need at least two sizes")
    if trials < 2:
        raise ValueError("trials must be >= 2")
    points = []
    for grid_index, n_cal in enumerate(size_list):
        reports = []
        for t in range(trials):
            cal_ss, test_ss = _rng_pair(seed, grid_index, t)
            cal = data_generator(n_cal, cal_ss)
            test = data_generator(n_test, test_ss)
            reports.append(_calibration_trial(t, cal, test, n_bins, metric_bins=metric_bins))
        mean_mce, std_mce = _mean_std([r.mce for r in reports])
        mean_ece, std_ece = _mean_std([r.ece for r in reports])
        auc_values = [r.auc_calibrated for r in reports if r.auc_calibrated is not None]
        points.append(
            SweepPoint(
                axis_value=float(n_cal),
                reports=tuple(reports),
                summary={
                    "n_cal": float(n_cal),
                    "mean_mce": mean_mce,
                    "se_mce": std_mce / math.sqrt(trials),
                    "mean_ece": mean_ece,
                    "se_ece": std_ece / math.sqrt(trials),
                    "mean_auc_calibrated": float(np.mean(auc_values)) if auc_values else math.nan,
                },
            )
        )
    assertions = [
        _monotone_assertion(points, "mean_mce", "se_mce", "mean MCE"),
        _monotone_assertion(points, "mean_ece", "se_ece", "mean ECE"),
    ]
    return SweepReport(axis_name="n_cal", points=points, assertions=assertions)


def _monotone_assertion(points, mean_key: str, se_key: str, label: str) -> Assertion:
    increases = []
    for left, right in zip(points, points[1:]):
        rise = right.summary[mean_key] - left.summary[mean_key]
        if rise > 0:
            se_diff = math.hypot(left.summary[se_key], right.summary[se_key])
            increases.append((rise, se_diff))
    if not increases:
        return Assertion(f"{label} non-increasing with size", True, 0.0, 0.0)
    worst_rise, worst_se = max(increases)
    ok = len(increases) == 1 and worst_rise <= worst_se
    return Assertion(
        name=f"{label} non-increasing with size (one within-SE inversion allowed)",
        passed=ok,
        observed=worst_rise,
        limit=worst_se,
    )


def write_sweep_csv(report: SweepReport, path) -> None:
    """One row per sweep point; columns from the point summaries."""
    if not report.points:
        raise ValueError("report has no points")
    columns = list(report.points[0].summary)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for point in report.points:
            writer.writerow([format(point.summary[c], ".17g") for c in columns])


def write_sweep_json(report: SweepReport, path) -> None:
    """Summary with the pass/fail verdict of every assertion."""
    from .serialize import dumps

    payload = {
        "axis": report.axis_name,
        "passed": report.passed,
        "slope": report.slope,
        "assertions": [
            {
                "name": a.name,
                "passed": a.passed,
                "observed": a.observed,
                "limit": a.limit,
            }
            for a in report.assertions
        ],
        "points": [
            {"axis_value": p.axis_value, **p.summary} for p in report.points
        ],
        "notes": list(report.notes),
    }
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dumps(payload) + "\n")
