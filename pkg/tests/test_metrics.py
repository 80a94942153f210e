import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import auc_by_pair_enumeration, ece_by_definition
from probcal.metrics import (
    ReliabilityBin,
    accuracy,
    auc,
    ece,
    evaluate,
    mce,
    reliability,
    rmse,
    write_reliability_csv,
)

# strategies shared by the property tests
score_arrays = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=2, max_size=120
)
label_lists = st.lists(st.integers(min_value=0, max_value=1), min_size=2, max_size=120)


def mixed_dataset(draw, min_size=2, max_size=120):
    n = draw(st.integers(min_value=min_size, max_value=max_size))
    scores = draw(
        st.lists(
            st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
            min_size=n,
            max_size=n,
        )
    )
    labels = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    # force both classes
    labels[0] = 0
    labels[-1] = 1
    return np.array(scores), np.array(labels)


datasets_with_both_classes = st.composite(mixed_dataset)()


class TestReliability:
    def test_two_group_worked_example(self):
        # two equal-weight groups predicting 0.2 (all negative) and 0.8
        # (all positive): each bin has gap 0.2, so ECE and MCE are both 0.2
        preds = np.array([0.2, 0.2, 0.8, 0.8])
        labels = np.array([0, 0, 1, 1])
        bins = reliability(preds, labels, num_bins=2)
        assert [b.count for b in bins] == [2, 2]
        assert bins[0].mean_prediction == pytest.approx(0.2)
        assert bins[0].positive_fraction == 0.0
        assert bins[1].mean_prediction == pytest.approx(0.8)
        assert bins[1].positive_fraction == 1.0
        assert ece(bins) == pytest.approx(0.2)
        assert mce(bins) == pytest.approx(0.2)

    def test_frequency_bin_sizes_differ_by_at_most_one(self):
        rng = np.random.default_rng(0)
        preds = rng.random(103)
        labels = rng.integers(0, 2, 103)
        bins = reliability(preds, labels, num_bins=10)
        counts = [b.count for b in bins]
        assert sum(counts) == 103
        assert max(counts) - min(counts) <= 1

    def test_width_bins_may_be_empty(self):
        preds = np.array([0.05, 0.06, 0.95])
        labels = np.array([0, 0, 1])
        bins = reliability(preds, labels, num_bins=10, scheme="width")
        assert bins[0].count == 2
        assert bins[9].count == 1
        empty = [b for b in bins if b.count == 0]
        assert len(empty) == 8
        for b in empty:
            assert math.isnan(b.mean_prediction)
            assert math.isnan(b.positive_fraction)
            assert b.weight == 0.0

    def test_width_bins_right_open_last_closed(self):
        preds = np.array([0.0, 0.1, 0.2, 1.0])
        labels = np.array([0, 0, 1, 1])
        bins = reliability(preds, labels, num_bins=10, scheme="width")
        # 0.1 and 0.2 sit at edges and belong to the bin on their right
        assert bins[0].count == 1
        assert bins[1].count == 1
        assert bins[2].count == 1
        # 1.0 goes to the last bin, not past it
        assert bins[9].count == 1

    def test_empty_bins_are_skipped_by_ece_and_mce(self):
        bins = [
            ReliabilityBin(0, 2, 0.1, 0.2, 0.5),
            ReliabilityBin(1, 0, math.nan, math.nan, 0.0),
            ReliabilityBin(2, 2, 0.9, 0.5, 0.5),
        ]
        assert ece(bins) == pytest.approx(0.5 * 0.1 + 0.5 * 0.4)
        assert mce(bins) == pytest.approx(0.4)

    def test_single_bin(self):
        preds = np.array([0.2, 0.4])
        labels = np.array([0, 1])
        bins = reliability(preds, labels, num_bins=1)
        assert len(bins) == 1
        assert bins[0].weight == 1.0

    def test_rejects_empty_input(self):
        with pytest.raises(ValueError):
            reliability(np.array([]), np.array([]))

    def test_rejects_bad_scheme(self):
        with pytest.raises(ValueError, match="scheme"):
            reliability(np.array([0.5]), np.array([1]), scheme="quantile")

    def test_rejects_nonpositive_bins(self):
        with pytest.raises(ValueError):
            reliability(np.array([0.5]), np.array([1]), num_bins=0)

    @settings(max_examples=60, deadline=None)
    @given(data=datasets_with_both_classes, num_bins=st.integers(1, 15))
    def test_weights_sum_to_one_and_ece_bounded_by_mce(self, data, num_bins):
        preds, labels = data
        for scheme in ("frequency", "width"):
            bins = reliability(preds, labels, num_bins=num_bins, scheme=scheme)
            assert sum(b.weight for b in bins) == pytest.approx(1.0)
            assert sum(b.count for b in bins) == len(preds)
            assert ece(bins) <= mce(bins) + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(data=datasets_with_both_classes, num_bins=st.integers(1, 12))
    def test_frequency_ece_matches_group_by_definition(self, data, num_bins):
        preds, labels = data
        bins = reliability(preds, labels, num_bins=num_bins)
        order = np.argsort(preds, kind="stable")
        groups = np.array_split(order, num_bins)
        position = {int(i): g for g, idx in enumerate(groups) for i in idx}
        expected = ece_by_definition(preds, labels, lambda i: position[i])
        assert ece(bins) == pytest.approx(expected, abs=1e-12)


class TestAuc:
    def test_four_sample_worked_example(self):
        scores = np.array([0.2, 0.4, 0.4, 0.8])
        labels = np.array([0, 1, 0, 1])
        # pairs: (.4,1)-(.2,0) win, (.4,1)-(.4,0) tie, (.8,1) beats both
        assert auc(scores, labels) == pytest.approx(0.875, abs=1e-12)

    def test_perfect_and_inverted(self):
        scores = np.array([0.1, 0.2, 0.8, 0.9])
        labels = np.array([0, 0, 1, 1])
        assert auc(scores, labels) == 1.0
        assert auc(scores, 1 - labels) == 0.0

    def test_all_tied_scores(self):
        scores = np.full(6, 0.5)
        labels = np.array([0, 1, 0, 1, 0, 1])
        assert auc(scores, labels) == 0.5

    def test_requires_both_classes(self):
        with pytest.raises(ValueError, match="both classes"):
            auc(np.array([0.1, 0.9]), np.array([1, 1]))

    @settings(max_examples=80, deadline=None)
    @given(data=datasets_with_both_classes)
    def test_matches_pair_enumeration(self, data):
        scores, labels = data
        assert auc(scores, labels) == pytest.approx(
            auc_by_pair_enumeration(scores, labels), abs=1e-12
        )

    @settings(max_examples=40, deadline=None)
    @given(
        grid=st.lists(st.integers(0, 10**6), min_size=2, max_size=80),
        labels=label_lists,
    )
    def test_invariant_under_strictly_monotone_transform(self, grid, labels):
        n = min(len(grid), len(labels))
        labels = np.array(labels[:n])
        labels[0], labels[-1] = 0, 1
        # grid spacing 1e-6 keeps the affine map free of rounding ties
        scores = np.array(grid[:n]) / 10**6
        squashed = scores / 2.0 + 0.25  # strictly increasing, stays in [0, 1]
        assert auc(squashed, labels) == pytest.approx(auc(scores, labels), abs=1e-12)


class TestPointMetrics:
    def test_rmse_worked_example(self):
        preds = np.array([0.0, 0.5, 1.0])
        labels = np.array([0, 1, 1])
        assert rmse(preds, labels) == pytest.approx(math.sqrt(0.25 / 3))

    def test_accuracy_threshold_is_inclusive(self):
        preds = np.array([0.5, 0.49])
        labels = np.array([1, 0])
        assert accuracy(preds, labels) == 1.0

    def test_accuracy_custom_threshold(self):
        preds = np.array([0.3, 0.3])
        labels = np.array([1, 0])
        assert accuracy(preds, labels, threshold=0.3) == 0.5

    def test_evaluate_bundles_all_measures(self):
        rng = np.random.default_rng(1)
        preds = rng.random(50)
        labels = (rng.random(50) < preds).astype(int)
        report = evaluate(preds, labels, num_bins=5)
        assert report.ece == pytest.approx(ece(report.bins))
        assert report.mce == pytest.approx(mce(report.bins))
        assert report.auc == pytest.approx(auc(preds, labels))
        assert report.rmse == pytest.approx(rmse(preds, labels))
        assert report.accuracy == pytest.approx(accuracy(preds, labels))
        assert len(report.bins) == 5


class TestReliabilityCsv:
    def test_round_trip_values(self, tmp_path):
        preds = np.array([0.2, 0.2, 0.8, 0.8])
        labels = np.array([0, 0, 1, 1])
        bins = reliability(preds, labels, num_bins=2)
        path = tmp_path / "bins.csv"
        write_reliability_csv(bins, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "bin_index,mean_prediction,positive_fraction,weight,count"
        first = lines[1].split(",")
        assert int(first[0]) == 0
        assert float(first[1]) == 0.2
        assert float(first[3]) == 0.5
        assert int(first[4]) == 2

    def test_writes_are_deterministic(self, tmp_path):
        rng = np.random.default_rng(2)
        preds = rng.random(30)
        labels = rng.integers(0, 2, 30)
        bins = reliability(preds, labels)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_reliability_csv(bins, a)
        write_reliability_csv(bins, b)
        assert a.read_bytes() == b.read_bytes()
