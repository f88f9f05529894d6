"""Convex loss functionals: value and functional derivative on a sample set.

The data distribution is the empirical measure of the training set, so every
functional is a (1/m)-normalized sum and its functional gradient is the
per-sample array representing dJ/du at the data points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EmpiricalL2", "SoftmaxCrossEntropy"]


@dataclass(frozen=True)
class EmpiricalL2:
    """J[u] = (1/m) sum_j (u_j - y_j)^2 over scalar predictions."""

    def _check(self, predictions, labels):
        u = np.asarray(predictions, dtype=float)
        y = np.asarray(labels, dtype=float)
        if u.shape != y.shape:
            raise ValueError(f"predictions {u.shape} and labels {y.shape} disagree")
        if u.size == 0:
            raise ValueError("empty sample set")
        return u, y

    def value(self, predictions, labels) -> float:
        u, y = self._check(predictions, labels)
        return float(np.mean((u - y) ** 2))

    def functional_gradient(self, predictions, labels) -> np.ndarray:
        u, y = self._check(predictions, labels)
        return 2.0 * (u - y) / u.shape[0]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class SoftmaxCrossEntropy:
    """J[u] = (1/m) sum_j -log softmax(u_j)[y_j] over logit rows u_j."""

    class_count: int

    def _check(self, predictions, labels):
        u = np.asarray(predictions, dtype=float)
        y = np.asarray(labels)
        if u.ndim != 2 or u.shape[1] != self.class_count:
            raise ValueError(f"expected logits of shape (m, {self.class_count}), got {u.shape}")
        if y.shape != (u.shape[0],):
            raise ValueError(f"labels of shape {y.shape} do not match m={u.shape[0]}")
        y = y.astype(int)
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise ValueError("labels out of class range")
        return u, y

    def value(self, predictions, labels) -> float:
        u, y = self._check(predictions, labels)
        shifted = u - u.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1))
        return float(np.mean(log_z - shifted[np.arange(u.shape[0]), y]))

    def functional_gradient(self, predictions, labels) -> np.ndarray:
        u, y = self._check(predictions, labels)
        g = _softmax(u)
        g[np.arange(u.shape[0]), y] -= 1.0
        return g / u.shape[0]
