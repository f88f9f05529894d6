"""Inner solvers: optimal outer weights for sampled inner parameters.

The ridge least-squares path goes through orthogonal factorizations only
(scipy lstsq for single solves, stacked QR for batches); the normal-equations
formulation exists solely as an independent oracle in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lstsq, solve_triangular

from .data import ClassificationDataset, RegressionDataset
from .loss import SoftmaxCrossEntropy
from .model import angle_feature_matrix, angle_feature_tensor, cosine_feature_matrix

__all__ = ["RIDGE", "InnerSolveReport", "solve_outer_lsq", "ridge_lsq_batch", "solve_outer_adam"]

RIDGE = 1e-8

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class InnerSolveReport:
    coefficients: np.ndarray
    residual_loss: float
    iterations: int
    condition_warning: bool


def solve_outer_lsq(thetas, dataset: RegressionDataset,
                    ridge: float = RIDGE) -> tuple[np.ndarray, InnerSolveReport]:
    """argmin_a ||Phi a - y||^2 + ridge ||a||^2, Phi the relu angle features."""
    if dataset.size == 0:
        raise ValueError("dataset is empty")
    phi = angle_feature_matrix(thetas, dataset.inputs)
    if not np.all(np.isfinite(phi)):
        raise ValueError("non-finite features in the inner solve")
    n = phi.shape[1]
    augmented = np.vstack([phi, np.sqrt(ridge) * np.eye(n)])
    rhs = np.concatenate([dataset.labels, np.zeros(n)])
    coef, _, rank, _ = lstsq(augmented, rhs, lapack_driver="gelsy")
    residual = phi @ coef - dataset.labels
    report = InnerSolveReport(coef, float(np.mean(residual ** 2)), 1, rank < n)
    return coef, report


def ridge_lsq_batch(features: np.ndarray, labels: np.ndarray, ridge: float = RIDGE) -> np.ndarray:
    """Ridge solves for a (B, m, N) stack of feature matrices; returns (B, N).

    Uses the R factor of each feature matrix plus a second small QR of
    [R; sqrt(ridge) I], which has the same R factor as QR of the augmented
    ridge matrix (identical Gram), so the route stays orthogonal while
    skipping the explicit Q.
    """
    feats = np.asarray(features, dtype=float)
    if not np.all(np.isfinite(feats)):
        raise ValueError("non-finite features in the inner solve")
    batch, _, n = feats.shape
    r_top = np.linalg.qr(feats, mode="r")
    stacked = np.concatenate([r_top, np.broadcast_to(np.sqrt(ridge) * np.eye(n), (batch, n, n))],
                             axis=1)
    r_full = np.linalg.qr(stacked, mode="r")
    rhs = feats.transpose(0, 2, 1) @ labels
    coefs = np.empty((batch, n))
    for b in range(batch):
        half = solve_triangular(r_full[b], rhs[b], trans="T", lower=False)
        coefs[b] = solve_triangular(r_full[b], half, lower=False)
    return coefs


def solve_outer_lsq_batch(thetas_batch: np.ndarray, dataset: RegressionDataset,
                          ridge: float = RIDGE) -> np.ndarray:
    """Batched solve_outer_lsq over a (B, N) stack of angle draws."""
    feats = angle_feature_tensor(np.asarray(thetas_batch, dtype=float), dataset.inputs)
    return ridge_lsq_batch(feats, dataset.labels, ridge)


def solve_outer_adam(freq, phase, dataset: ClassificationDataset, epochs: int = 2,
                     lr: float = 1e-3, batch_size: int = 100,
                     rng: np.random.Generator | None = None
                     ) -> tuple[np.ndarray, np.ndarray, InnerSolveReport]:
    """Adam on the outer layer (a, c) of a cosine net, features held fixed.

    Zero initialization; softmax cross-entropy objective; minibatches are
    seeded permutations per epoch (sequential order when rng is None).
    """
    if dataset.size == 0:
        raise ValueError("dataset is empty")
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    feats = cosine_feature_matrix(freq, phase, dataset.inputs)
    m, n = feats.shape
    classes = dataset.class_count
    objective = SoftmaxCrossEntropy(classes)

    outer = np.zeros((n, classes))
    bias = np.zeros(classes)
    m_outer = np.zeros_like(outer)
    v_outer = np.zeros_like(outer)
    m_bias = np.zeros_like(bias)
    v_bias = np.zeros_like(bias)
    steps = 0
    for _ in range(epochs):
        order = np.arange(m) if rng is None else rng.permutation(m)
        for start in range(0, m, batch_size):
            idx = order[start:start + batch_size]
            logits = feats[idx] @ outer + bias
            grad_logits = objective.functional_gradient(logits, dataset.labels[idx])
            g_outer = feats[idx].T @ grad_logits
            g_bias = grad_logits.sum(axis=0)
            steps += 1
            correction1 = 1.0 - ADAM_BETA1 ** steps
            correction2 = 1.0 - ADAM_BETA2 ** steps
            m_outer = ADAM_BETA1 * m_outer + (1.0 - ADAM_BETA1) * g_outer
            v_outer = ADAM_BETA2 * v_outer + (1.0 - ADAM_BETA2) * g_outer ** 2
            outer -= lr * (m_outer / correction1) / (np.sqrt(v_outer / correction2) + ADAM_EPS)
            m_bias = ADAM_BETA1 * m_bias + (1.0 - ADAM_BETA1) * g_bias
            v_bias = ADAM_BETA2 * v_bias + (1.0 - ADAM_BETA2) * g_bias ** 2
            bias -= lr * (m_bias / correction1) / (np.sqrt(v_bias / correction2) + ADAM_EPS)

    final = objective.value(feats @ outer + bias, dataset.labels)
    report = InnerSolveReport(outer, final, steps, False)
    return outer, bias, report
