"""Score/label containers, CSV ingestion, and calibration-set construction."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, NamedTuple

import numpy as np

from ._validation import as_labels, as_scores, check_same_length


class ScoredSample(NamedTuple):
    """One instance: uncalibrated score in [0, 1] plus binary label."""

    score: float
    label: int


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ScoredDataset:
    """An ordered collection of (score, label) pairs.

    Arrays are validated and made read-only at construction, so instances
    are safe to share across threads.
    """

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = as_scores(self.scores)
        labels = as_labels(self.labels)
        check_same_length(scores, labels)
        object.__setattr__(self, "scores", _freeze(scores))
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def n_samples(self) -> int:
        return int(self.scores.size)

    @property
    def n_pos(self) -> int:
        return int(np.count_nonzero(self.labels))

    @property
    def n_neg(self) -> int:
        return self.n_samples - self.n_pos

    def __len__(self) -> int:
        return self.n_samples

    def __getitem__(self, i: int) -> ScoredSample:
        return ScoredSample(float(self.scores[i]), int(self.labels[i]))

    def __iter__(self) -> Iterator[ScoredSample]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, indices) -> "ScoredDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return ScoredDataset(self.scores[idx].copy(), self.labels[idx].copy())


@dataclass(frozen=True)
class FeatureDataset:
    """Feature vectors of fixed dimension with binary labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        labels = as_labels(self.labels)
        check_same_length(feats, labels, "features and labels")
        object.__setattr__(self, "features", _freeze(feats))
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    def __len__(self) -> int:
        return self.n_samples

    def subset(self, indices) -> "FeatureDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return FeatureDataset(self.features[idx].copy(), self.labels[idx].copy())


def load_scored_csv(
    path,
    score_column: str = "score",
    label_column: str = "label",
) -> ScoredDataset:
    """Read (score, label) rows from a headered CSV file.

    Scores must parse as reals in [0, 1] and labels as 0/1; violations are
    reported with the 1-based data-row number (the header is not counted).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    scores: list[float] = []
    labels: list[int] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, expected a header row")
        for column in (score_column, label_column):
            if column not in reader.fieldnames:
                raise ValueError(
                    f"{path}: missing column {column!r}; file has {reader.fieldnames}"
                )
        for row_number, row in enumerate(reader, start=1):
            raw_score = row.get(score_column)
            raw_label = row.get(label_column)
            if raw_score is None or raw_label is None:
                raise ValueError(f"{path}: row {row_number}: short row")
            try:
                score = float(raw_score)
            except ValueError:
                raise ValueError(
                    f"{path}: row {row_number}: cannot parse score {raw_score!r}"
                ) from None
            if not 0.0 <= score <= 1.0:
                raise ValueError(
                    f"{path}: row {row_number}: score {raw_score} outside [0, 1]"
                )
            if raw_label.strip() not in ("0", "1"):
                raise ValueError(
                    f"{path}: row {row_number}: label {raw_label!r} not in {{0, 1}}"
                )
            scores.append(score)
            labels.append(int(raw_label))
    return ScoredDataset(np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=np.int64))


def split(data, fraction: float, seed):
    """Randomly partition a dataset into two disjoint parts.

    Part A receives round(fraction * N) samples. Deterministic given the seed.
    Works on both ScoredDataset and FeatureDataset.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(data)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    size_a = int(round(fraction * n))
    return data.subset(order[:size_a]), data.subset(order[size_a:])


def kfold_calibration_set(
    data: FeatureDataset,
    k: int,
    trainer: Callable[[FeatureDataset], Callable[[np.ndarray], np.ndarray]],
    seed,
) -> ScoredDataset:
    """Build a calibration set by k-fold cross scoring.

    Rows are shuffled once (seeded) and cut into k contiguous folds. For each
    fold a model is trained on the remaining k-1 folds and used to score the
    held-out rows, so no row is ever scored by a model trained on it. With
    k = N this is the leave-one-out scheme. The result has exactly one
    (score, label) entry per input row, in the original row order.
    """
    n = len(data)
    if not 2 <= k <= n:
        raise ValueError(f"k must satisfy 2 <= k <= {n}, got {k}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    folds = np.array_split(order, k)
    scores = np.empty(n, dtype=np.float64)
    for fold_index, held_out in enumerate(folds):
        train_idx = np.concatenate([f for i, f in enumerate(folds) if i != fold_index])
        try:
            score_fn = trainer(data.subset(train_idx))
        except Exception as exc:
            raise RuntimeError(f"trainer failed on fold {fold_index}: {exc}") from exc
        scores[held_out] = as_scores(score_fn(data.features[held_out]), "fold scores")
    return ScoredDataset(scores, data.labels.copy())
