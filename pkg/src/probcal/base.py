"""Estimator base class shared by all calibrators.

Calibrators follow the familiar fit/predict pattern: ``fit(scores, labels)``
learns a map from uncalibrated scores to probabilities, ``predict(scores)``
applies it. Fitted state lives in attributes with a trailing underscore.
"""

from __future__ import annotations

import inspect

import numpy as np

from ._validation import as_scores


class NotFittedError(ValueError):
    """Raised when predict is called before fit."""


class BaseCalibrator:
    def get_params(self) -> dict:
        """Constructor parameters as a dict, by introspection of __init__."""
        sig = inspect.signature(type(self).__init__)
        return {
            name: getattr(self, name)
            for name in sig.parameters
            if name != "self"
        }

    def set_params(self, **params) -> "BaseCalibrator":
        valid = self.get_params()
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"unknown parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def _require_fitted(self, *attributes: str) -> None:
        for attr in attributes:
            if getattr(self, attr, None) is None:
                raise NotFittedError(
                    f"{type(self).__name__} is not fitted; call fit first"
                )

    @staticmethod
    def _prepare_queries(scores) -> tuple[np.ndarray, bool]:
        """Validate query scores; remember whether the input was scalar."""
        scalar = np.isscalar(scores) or (
            isinstance(scores, np.ndarray) and scores.ndim == 0
        )
        return as_scores(scores), scalar

    @staticmethod
    def _finish(result: np.ndarray, scalar: bool):
        return float(result[0]) if scalar else result

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"
