"""Shared input checks for score and label arrays."""

from __future__ import annotations

import numpy as np


def as_scores(values, name: str = "scores") -> np.ndarray:
    """Coerce to a 1-D float64 array of probabilities in [0, 1]."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return arr


def as_labels(values, name: str = "labels") -> np.ndarray:
    """Coerce to a 1-D int64 array with entries in {0, 1}."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    out = np.asarray(arr, dtype=np.int64)
    if arr.size and not np.array_equal(out, np.asarray(arr, dtype=np.float64)):
        raise ValueError(f"{name} must contain only 0 and 1")
    if out.size and not np.isin(out, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    return out


def check_same_length(a: np.ndarray, b: np.ndarray, what: str = "scores and labels") -> None:
    if len(a) != len(b):
        raise ValueError(f"{what} must have equal length, got {len(a)} and {len(b)}")


def class_counts(labels: np.ndarray) -> tuple[int, int, int]:
    """Return (total, positives, negatives)."""
    total = int(labels.size)
    pos = int(np.count_nonzero(labels))
    return total, pos, total - pos
