"""Probability-simplex geometry: Euclidean projection and categorical sampling."""

from __future__ import annotations

import numpy as np

__all__ = ["SimplexVector", "project_to_simplex", "sample_categorical"]

SUM_TOL = 1e-9


def _validated(weights) -> np.ndarray:
    w = np.array(weights, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("simplex vector must be a 1-d sequence of length >= 1")
    if not np.all(np.isfinite(w)):
        raise ValueError("simplex vector entries must be finite")
    if w.min() < 0.0:
        raise ValueError(f"simplex vector entries must be >= 0, got min {w.min()!r}")
    total = float(w.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"simplex vector must sum to 1 within {SUM_TOL}, got {total!r}")
    return w


class SimplexVector:
    """Mixture coefficients on the probability simplex.

    Entries must be non-negative and sum to 1 within SUM_TOL; the stored
    array is renormalized so the sum is exactly 1, and frozen.
    """

    __slots__ = ("weights",)

    def __init__(self, weights) -> None:
        w = _validated(weights)
        w /= float(w.sum())
        w.flags.writeable = False
        self.weights = w

    @classmethod
    def exact(cls, weights) -> "SimplexVector":
        """Wrap weights verbatim, skipping renormalization.

        Renormalizing twice can shift the last bits, so deserialized vectors
        come through here to keep save/load round trips exact.
        """
        self = object.__new__(cls)
        w = _validated(weights)
        w.flags.writeable = False
        self.weights = w
        return self

    def __len__(self) -> int:
        return self.weights.size

    def __getitem__(self, i):
        return self.weights[i]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def __repr__(self) -> str:
        return f"SimplexVector({self.weights.tolist()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, SimplexVector) and np.array_equal(self.weights, other.weights)


def project_to_simplex(v) -> SimplexVector:
    """Euclidean projection of v onto the probability simplex.

    Sort-and-threshold rule: with u = sort(v) descending and c_j the prefix
    sums, rho = max{ j : u_j + (1 - c_j)/j > 0 } and tau = (c_rho - 1)/rho;
    the projection is max(v - tau, 0).
    """
    w = np.asarray(v, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("projection input must be a 1-d sequence of length >= 1")
    if not np.all(np.isfinite(w)):
        raise ValueError("cannot project a non-finite vector onto the simplex")
    u = np.sort(w)[::-1]
    cumsum = np.cumsum(u)
    ranks = np.arange(1, w.size + 1)
    rho = np.nonzero(u + (1.0 - cumsum) / ranks > 0.0)[0][-1]
    tau = (cumsum[rho] - 1.0) / (rho + 1.0)
    return SimplexVector(np.maximum(w - tau, 0.0))


def sample_categorical(alpha, rng: np.random.Generator) -> int:
    """Draw a component index with probability alpha_i from the given stream."""
    w = np.asarray(alpha, dtype=float)
    cumulative = np.cumsum(w)
    index = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return min(index, w.size - 1)
