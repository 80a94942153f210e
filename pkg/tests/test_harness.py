import json
import math

import numpy as np
import pytest

from probcal.data import ScoredDataset
from probcal.harness import (
    Assertion,
    SweepPoint,
    SweepReport,
    _monotone_assertion,
    calibration_size_sweep,
    default_test_size,
    hoeffding_bound,
    mce_bound,
    oracle_generator,
    verify_auc_loss,
    verify_ece_rate,
    verify_mce_bound,
    verify_theta_concentration,
    write_sweep_csv,
    write_sweep_json,
)
from probcal.synth import OracleSpec

IDENTITY = OracleSpec()


class TestBounds:
    def test_mce_bound_reference_value(self):
        # B=10, N=1000, delta=0.05
        assert mce_bound(1000, 10, 0.05) == pytest.approx(0.3462, abs=1e-4)

    def test_mce_bound_closed_form(self):
        value = mce_bound(777, 13, 0.02)
        expected = math.sqrt(2 * 13 * math.log(2 * 13 / 0.02) / 777)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_quadrupling_n_halves_the_bound(self):
        assert mce_bound(4000, 10, 0.05) == pytest.approx(
            0.5 * mce_bound(1000, 10, 0.05), rel=1e-12
        )

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.1, 1.5])
    def test_mce_bound_rejects_bad_delta(self, delta):
        with pytest.raises(ValueError, match="delta"):
            mce_bound(1000, 10, delta)

    def test_hoeffding_reference_value(self):
        # eps=0.05, N=1e4, B=10 gives 2 exp(-5)
        assert hoeffding_bound(0.05, 10_000, 10) == pytest.approx(
            2 * math.exp(-5), abs=1e-12
        )

    def test_hoeffding_closed_form(self):
        value = hoeffding_bound(0.03, 5000, 7)
        expected = 2 * math.exp(-2 * 5000 * 0.03**2 / 7)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_hoeffding_trivial_at_zero_epsilon(self):
        assert hoeffding_bound(0.0, 1000, 10) == 2.0

    def test_default_test_size(self):
        assert default_test_size(100) == 100_000
        assert default_test_size(10_000) == 100_000
        assert default_test_size(50_000) == 500_000


class TestVerifyMceBound:
    def test_report_structure(self):
        report = verify_mce_bound(IDENTITY, n_cal=200, n_bins=5, trials=5, n_test=2000)
        assert report.axis_name == "n_cal"
        assert len(report.points) == 1
        point = report.points[0]
        assert len(point.reports) == 5
        assert point.summary["mce_bound"] == pytest.approx(mce_bound(200, 5, 0.05))
        assert 0.0 <= point.summary["fraction_within_bound"] <= 1.0
        assert len(report.assertions) == 1
        assert "fraction of trials" in report.assertions[0].name

    def test_auc_loss_is_exact_difference(self):
        report = verify_mce_bound(IDENTITY, n_cal=200, n_bins=5, trials=4, n_test=2000)
        for r in report.points[0].reports:
            assert r.auc_loss == r.auc_raw - r.auc_calibrated

    def test_deterministic(self):
        a = verify_mce_bound(IDENTITY, n_cal=150, n_bins=5, trials=3, n_test=1000, seed=7)
        b = verify_mce_bound(IDENTITY, n_cal=150, n_bins=5, trials=3, n_test=1000, seed=7)
        assert a.points[0].summary == b.points[0].summary

    def test_trial_streams_do_not_depend_on_trial_count(self):
        # trial t draws the same data whether the run has 1 trial or 3
        short = verify_mce_bound(IDENTITY, n_cal=150, n_bins=5, trials=1, n_test=1000)
        long = verify_mce_bound(IDENTITY, n_cal=150, n_bins=5, trials=3, n_test=1000)
        assert short.points[0].reports[0].mce == long.points[0].reports[0].mce

    def test_one_class_oracle_noted_and_auc_skipped(self):
        report = verify_mce_bound(
            OracleSpec(curve="constant", level=1.0), n_cal=100, n_bins=2, trials=3, n_test=500
        )
        assert report.notes == ["3/3 trials had one-class test data; AUC skipped there"]
        for r in report.points[0].reports:
            assert r.auc_raw is None
            assert r.auc_loss is None

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError, match="trials"):
            verify_mce_bound(IDENTITY, trials=0)

    def test_generous_bound_holds_on_small_run(self):
        # with delta=0.5 the bound is loose enough that a short run passes
        report = verify_mce_bound(
            IDENTITY, n_cal=500, n_bins=5, delta=0.5, trials=10, n_test=50_000
        )
        assert report.passed


class TestVerifyEceRate:
    def test_rejects_narrow_grid(self):
        with pytest.raises(ValueError, match="two decades"):
            verify_ece_rate(IDENTITY, n_grid=(100, 1000), trials=2)

    def test_rejects_single_size(self):
        with pytest.raises(ValueError, match="two positive sizes"):
            verify_ece_rate(IDENTITY, n_grid=(1000,), trials=2)

    def test_slope_is_negative_on_identity(self):
        report = verify_ece_rate(IDENTITY, n_bins=5, n_grid=(100, 1000, 10_000), trials=5)
        assert report.slope is not None
        assert report.slope < 0
        assert len(report.points) == 3
        assert "log-log ECE slope" in report.assertions[0].name

    def test_more_bins_do_not_shrink_ece(self):
        # error grows like sqrt(B/N): doubling B at fixed N cannot help
        coarse = verify_ece_rate(IDENTITY, n_bins=5, n_grid=(100, 10_000), trials=5)
        fine = verify_ece_rate(IDENTITY, n_bins=10, n_grid=(100, 10_000), trials=5)
        for point_coarse, point_fine in zip(coarse.points, fine.points):
            assert point_fine.summary["mean_ece"] >= point_coarse.summary["mean_ece"]

    def test_per_trial_values_independent_of_trial_count(self):
        few = verify_ece_rate(IDENTITY, n_bins=5, n_grid=(100, 10_000), trials=1)
        more = verify_ece_rate(IDENTITY, n_bins=5, n_grid=(100, 10_000), trials=3)
        for point_few, point_more in zip(few.points, more.points):
            assert point_few.reports[0].ece == point_more.reports[0].ece


class TestVerifyAucLoss:
    def test_rejects_bins_beyond_sqrt_n(self):
        with pytest.raises(ValueError, match="sqrt"):
            verify_auc_loss(IDENTITY, n_cal=100, bin_grid=(5, 11), trials=2)

    def test_rejects_single_trial(self):
        with pytest.raises(ValueError, match="trials"):
            verify_auc_loss(IDENTITY, n_cal=100, bin_grid=(5,), trials=1)

    def test_report_structure_and_limits(self):
        report = verify_auc_loss(IDENTITY, n_cal=2500, bin_grid=(5, 10), trials=3)
        assert report.axis_name == "n_bins"
        assert [p.axis_value for p in report.points] == [5.0, 10.0]
        for point, assertion in zip(report.points, report.assertions):
            b = point.summary["n_bins"]
            expected = 1.0 / (2.0 * b) + 3.0 * point.summary["stderr_auc_loss"]
            assert point.summary["loss_limit"] == pytest.approx(expected, abs=1e-15)
            assert f"B={int(b)}" in assertion.name
            assert 0.5 < point.summary["mean_auc_raw"] < 1.0

    def test_degenerate_oracle_raises(self):
        with pytest.raises(RuntimeError, match="degenerate"):
            verify_auc_loss(
                OracleSpec(curve="constant", level=1.0), n_cal=100, bin_grid=(5,), trials=2
            )


class TestVerifyThetaConcentration:
    def test_small_run_structure(self):
        report = verify_theta_concentration(
            IDENTITY, n_cal=1000, n_bins=5, epsilon_grid=(0.001, 0.5), trials=10
        )
        assert report.axis_name == "epsilon"
        assert [p.axis_value for p in report.points] == [0.001, 0.5]
        # one assertion per epsilon plus the centering check
        assert len(report.assertions) == 3
        assert report.assertions[-1].name.startswith("per-bin mean deviation")

    def test_trivial_epsilon_always_satisfied(self):
        # bound above 1 can never be exceeded by a frequency
        report = verify_theta_concentration(
            IDENTITY, n_cal=1000, n_bins=5, epsilon_grid=(0.001,), trials=5
        )
        tiny = report.assertions[0]
        assert tiny.limit > 1.0
        assert tiny.passed

    def test_large_epsilon_never_exceeded(self):
        report = verify_theta_concentration(
            IDENTITY, n_cal=1000, n_bins=5, epsilon_grid=(0.5,), trials=10
        )
        assert report.assertions[0].observed == 0.0

    def test_rejects_bad_epsilon_grid(self):
        with pytest.raises(ValueError, match="epsilon"):
            verify_theta_concentration(IDENTITY, epsilon_grid=(), trials=2)
        with pytest.raises(ValueError, match="epsilon"):
            verify_theta_concentration(IDENTITY, epsilon_grid=(-0.1, 0.1), trials=2)

    def test_tied_scores_raise(self, monkeypatch):
        def tied(spec, n, seed):
            labels = np.arange(int(n)) % 2
            return ScoredDataset(np.full(int(n), 0.5), labels)

        monkeypatch.setattr("probcal.harness.generate_oracle", tied)
        with pytest.raises(RuntimeError, match="degenerate binning"):
            verify_theta_concentration(IDENTITY, n_cal=100, n_bins=5, trials=2)


class TestCalibrationSizeSweep:
    def test_rejects_unsorted_sizes(self):
        with pytest.raises(ValueError, match="ascending"):
            calibration_size_sweep(oracle_generator(IDENTITY), sizes=(1000, 100), trials=2)

    def test_rejects_single_size(self):
        with pytest.raises(ValueError, match="two sizes"):
            calibration_size_sweep(oracle_generator(IDENTITY), sizes=(100,), trials=2)

    def test_rejects_single_trial(self):
        with pytest.raises(ValueError, match="trials"):
            calibration_size_sweep(oracle_generator(IDENTITY), sizes=(100, 1000), trials=1)

    def test_constant_oracle_calibrates_to_small_error(self):
        # truth is flat at 0.5, so per-bin noise is all that remains
        generator = oracle_generator(OracleSpec(curve="constant", level=0.5))
        report = calibration_size_sweep(
            generator, sizes=(100, 1000), trials=3, n_test=5000, n_bins=5
        )
        assert report.points[-1].summary["mean_mce"] < 0.1

    def test_structure_and_assertion_labels(self):
        report = calibration_size_sweep(
            oracle_generator(IDENTITY), sizes=(100, 1000), trials=3, n_test=5000
        )
        assert report.axis_name == "n_cal"
        assert len(report.points) == 2
        names = [a.name for a in report.assertions]
        assert any("mean MCE" in n for n in names)
        assert any("mean ECE" in n for n in names)
        for point in report.points:
            for key in ("mean_mce", "se_mce", "mean_ece", "se_ece", "mean_auc_calibrated"):
                assert key in point.summary

    def test_deterministic(self):
        generator = oracle_generator(IDENTITY)
        a = calibration_size_sweep(generator, sizes=(100, 1000), trials=2, n_test=2000)
        b = calibration_size_sweep(generator, sizes=(100, 1000), trials=2, n_test=2000)
        assert [p.summary for p in a.points] == [p.summary for p in b.points]


def _point(mean, se):
    return SweepPoint(axis_value=0.0, reports=(), summary={"m": mean, "se": se})


class TestMonotoneAssertion:
    def test_strictly_decreasing_passes(self):
        points = [_point(0.3, 0.01), _point(0.2, 0.01), _point(0.1, 0.01)]
        result = _monotone_assertion(points, "m", "se", "mean MCE")
        assert result.passed
        assert result.observed == 0.0

    def test_one_small_rise_tolerated(self):
        points = [_point(0.3, 0.01), _point(0.305, 0.01), _point(0.1, 0.01)]
        result = _monotone_assertion(points, "m", "se", "mean MCE")
        assert result.passed

    def test_one_large_rise_fails(self):
        points = [_point(0.3, 0.01), _point(0.4, 0.01), _point(0.1, 0.01)]
        result = _monotone_assertion(points, "m", "se", "mean MCE")
        assert not result.passed
        assert result.observed == pytest.approx(0.1)

    def test_two_rises_fail_even_if_small(self):
        points = [_point(0.3, 0.01), _point(0.305, 0.01), _point(0.31, 0.01)]
        result = _monotone_assertion(points, "m", "se", "mean MCE")
        assert not result.passed


class TestSweepOutput:
    @pytest.fixture()
    def small_report(self):
        return verify_mce_bound(IDENTITY, n_cal=150, n_bins=5, trials=3, n_test=1000)

    def test_csv_round_trip(self, small_report, tmp_path):
        path = tmp_path / "sweep.csv"
        write_sweep_csv(small_report, path)
        lines = path.read_text().strip().split("\n")
        header = lines[0].split(",")
        assert header == list(small_report.points[0].summary)
        values = lines[1].split(",")
        assert float(values[header.index("n_cal")]) == 150.0

    def test_csv_rejects_empty_report(self, tmp_path):
        empty = SweepReport(axis_name="n_cal", points=[], assertions=[])
        with pytest.raises(ValueError, match="no points"):
            write_sweep_csv(empty, tmp_path / "empty.csv")

    def test_json_payload(self, small_report, tmp_path):
        path = tmp_path / "sweep.json"
        write_sweep_json(small_report, path)
        payload = json.loads(path.read_text())
        assert payload["axis"] == "n_cal"
        assert payload["passed"] == small_report.passed
        assert payload["slope"] is None
        assert payload["assertions"][0]["name"] == small_report.assertions[0].name
        assert payload["points"][0]["axis_value"] == 150.0
        assert payload["notes"] == []

    def test_output_files_byte_identical_across_reruns(self, tmp_path):
        paths = []
        for run in ("a", "b"):
            report = verify_mce_bound(IDENTITY, n_cal=150, n_bins=5, trials=3, n_test=1000)
            csv_path = tmp_path / f"{run}.csv"
            json_path = tmp_path / f"{run}.json"
            write_sweep_csv(report, csv_path)
            write_sweep_json(report, json_path)
            paths.append((csv_path.read_bytes(), json_path.read_bytes()))
        assert paths[0] == paths[1]

    def test_assertion_fields(self):
        a = Assertion(name="x", passed=True, observed=0.1, limit=0.2)
        assert a.passed and a.observed < a.limit
