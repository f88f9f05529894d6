"""Parameterized hypothesis classes with the outer linear layer exposed."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "AngleReluNet",
    "CosineFeatureNet",
    "ModelFunction",
    "relu",
    "angle_feature_matrix",
    "eval_angle_net",
    "cosine_feature_matrix",
    "eval_cosine_net",
    "as_model_function",
    "ensemble_eval",
]


def relu(z):
    """max(z, 0); relu(0) = 0 by convention."""
    return np.maximum(np.asarray(z, dtype=float), 0.0)


@dataclass(frozen=True)
class AngleReluNet:
    """u(x) = sum_j outer_j * relu(cos(theta_j) x + sin(theta_j)), scalar x."""

    thetas: np.ndarray
    outer: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "thetas", np.asarray(self.thetas, dtype=float))
        object.__setattr__(self, "outer", np.asarray(self.outer, dtype=float))
        if self.thetas.shape != self.outer.shape or self.thetas.ndim != 1:
            raise ValueError("thetas and outer must be 1-d arrays of equal length")


@dataclass(frozen=True)
class CosineFeatureNet:
    """u(x) = sum_j outer_j * cos(freq_j . x + phase_j) + bias, vector output."""

    freq: np.ndarray    # (N, v_dim)
    phase: np.ndarray   # (N,)
    outer: np.ndarray   # (N, class_count)
    bias: np.ndarray    # (class_count,)

    def __post_init__(self) -> None:
        for name in ("freq", "phase", "outer", "bias"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.freq.shape[0]
        if self.freq.ndim != 2 or self.phase.shape != (n,) or self.outer.shape[0] != n \
                or self.outer.ndim != 2 or self.bias.shape != (self.outer.shape[1],):
            raise ValueError("inconsistent cosine net shapes")


@dataclass(frozen=True)
class ModelFunction:
    """Pure evaluator from input points to outputs, with dimension metadata."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    input_dim: int
    output_dim: int


def angle_feature_matrix(thetas, inputs) -> np.ndarray:
    """Entry (j, k) = relu(cos(theta_k) x_j + sin(theta_k)); shape (m, N)."""
    th = np.asarray(thetas, dtype=float)
    x = np.asarray(inputs, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("inputs must be finite")
    return relu(np.cos(th)[None, :] * x[:, None] + np.sin(th)[None, :])


def angle_feature_tensor(thetas_batch: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Stacked feature matrices for a (B, N) batch of angle draws; shape (B, m, N)."""
    th = np.asarray(thetas_batch, dtype=float)
    x = np.asarray(inputs, dtype=float)
    z = np.cos(th)[:, None, :] * x[None, :, None] + np.sin(th)[:, None, :]
    np.maximum(z, 0.0, out=z)
    return z


def eval_angle_net(net: AngleReluNet, inputs) -> np.ndarray:
    return angle_feature_matrix(net.thetas, inputs) @ net.outer


def cosine_feature_matrix(freq, phase, inputs) -> np.ndarray:
    """Entry (j, k) = cos(freq_k . x_j + phase_k); shape (m, N)."""
    f = np.asarray(freq, dtype=float)
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[1] != f.shape[1]:
        raise ValueError(f"inputs of shape {x.shape} do not match frequencies of shape {f.shape}")
    return np.cos(x @ f.T + np.asarray(phase, dtype=float)[None, :])


def eval_cosine_net(net: CosineFeatureNet, inputs) -> np.ndarray:
    return cosine_feature_matrix(net.freq, net.phase, inputs) @ net.outer + net.bias[None, :]


def as_model_function(net) -> ModelFunction:
    if isinstance(net, AngleReluNet):
        return ModelFunction(lambda x, _n=net: eval_angle_net(_n, x), 1, 1)
    if isinstance(net, CosineFeatureNet):
        return ModelFunction(lambda x, _n=net: eval_cosine_net(_n, x),
                             net.freq.shape[1], net.outer.shape[1])
    raise TypeError(f"no evaluator for {type(net).__name__}")


def ensemble_eval(models, inputs) -> np.ndarray:
    """Arithmetic mean of per-model outputs, accumulated left to right."""
    models = list(models)
    if not models:
        raise ValueError("ensemble must contain at least one model")
    total = np.array(models[0].evaluate(inputs), dtype=float)
    for m in models[1:]:
        total += m.evaluate(inputs)
    return total / len(models)
