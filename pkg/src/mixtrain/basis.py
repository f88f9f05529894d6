"""Approximate-identity envelopes and mixture families over parameter space.

A MixtureBasis is an ordered tuple of BasicDistributions of equal dimension;
mixture coefficients live on the simplex (module simplex). Components built
here carry a (label, params) pair so trained mixtures can be serialized and
rebuilt (module engine).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .simplex import sample_categorical

__all__ = [
    "Envelope",
    "BasicDistribution",
    "MixtureBasis",
    "envelope_density",
    "envelope_sample",
    "scaled_translated",
    "make_angle_basis",
    "make_gauss_uniform_basis",
    "build_component",
    "mixture_density",
    "sample_mixture",
    "sample_product",
]

TWO_PI = 2.0 * math.pi

ENVELOPE_KINDS = ("triangle", "truncated-gaussian")


@dataclass(frozen=True)
class Envelope:
    """Mother bump on the line: non-negative, compactly supported, unit mass."""

    kind: str
    radius: float = 3.0  # truncation radius, truncated-gaussian only

    def __post_init__(self) -> None:
        if self.kind not in ENVELOPE_KINDS:
            raise ValueError(f"unknown envelope kind {self.kind!r}, expected one of {ENVELOPE_KINDS}")
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError("truncation radius must be positive and finite")

    @property
    def support(self) -> tuple[float, float]:
        r = 1.0 if self.kind == "triangle" else self.radius
        return (-r, r)


def envelope_density(e: Envelope, x):
    """Density of the envelope at x (vectorized; zero outside the support)."""
    xs = np.asarray(x, dtype=float)
    if e.kind == "triangle":
        return np.maximum(0.0, 1.0 - np.abs(xs))
    # Gaussian truncated at |x| <= radius, renormalized to unit mass.
    mass = math.erf(e.radius / math.sqrt(2.0))
    core = np.exp(-0.5 * xs * xs) / (math.sqrt(TWO_PI) * mass)
    return np.where(np.abs(xs) <= e.radius, core, 0.0)


def envelope_sample(e: Envelope, rng: np.random.Generator) -> float:
    """One draw from the envelope, consuming the caller's stream."""
    if e.kind == "triangle":
        # sum of two uniforms on [0,1], shifted: triangular density 1 - |x|
        return rng.random() + rng.random() - 1.0
    while True:
        z = rng.standard_normal()
        if abs(z) <= e.radius:
            return float(z)


@dataclass(frozen=True)
class BasicDistribution:
    """One mixture component: a density and a sampler over parameter points.

    For dimension 1 the density accepts scalars or arrays; for dimension d > 1
    it takes a single point of shape (d,). `params` holds the constructor
    arguments when the component is rebuildable from text (see engine
    serialization); ad-hoc components may leave it None.
    """

    dimension: int
    density: Callable
    sampler: Callable
    label: str
    params: dict | None = field(default=None)

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("component dimension must be >= 1")


@dataclass(frozen=True)
class MixtureBasis:
    components: tuple[BasicDistribution, ...]

    def __post_init__(self) -> None:
        if len(self.components) == 0:
            raise ValueError("mixture basis must have at least one component")
        dims = {c.dimension for c in self.components}
        if len(dims) != 1:
            raise ValueError(f"component dimensions disagree: {sorted(dims)}")

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def dimension(self) -> int:
        return self.components[0].dimension


def scaled_translated(e: Envelope, sigma: float, mu: float) -> BasicDistribution:
    """Component with density w -> envelope((w - mu)/sigma)/sigma, sigma in (0, 1]."""
    if not (0.0 < sigma <= 1.0):
        raise ValueError(f"sigma must lie in (0, 1], got {sigma!r}")
    mu = float(mu)

    def density(w, _e=e, _s=sigma, _m=mu):
        return envelope_density(_e, (np.asarray(w, dtype=float) - _m) / _s) / _s

    def sampler(rng, _e=e, _s=sigma, _m=mu):
        return _m + _s * envelope_sample(_e, rng)

    params = {"sigma": float(sigma), "mu": mu}
    if e.kind == "truncated-gaussian":
        params["radius"] = float(e.radius)
    return BasicDistribution(1, density, sampler, f"scaled-{e.kind}", params)


def _angle_component(index: int, n: int) -> BasicDistribution:
    # density (n/2pi) * tri((n/2pi) theta - index + 1) on [0, 2pi]; the i=1
    # component overhangs theta=0, so it is truncated there and renormalized
    # (half of the triangle mass survives).
    scale = n / TWO_PI
    center = (index - 1) / scale
    renorm = 2.0 if index == 1 else 1.0

    def density(theta, _s=scale, _i=index, _r=renorm):
        th = np.asarray(theta, dtype=float)
        bump = np.maximum(0.0, 1.0 - np.abs(_s * th - (_i - 1)))
        inside = (th >= 0.0) & (th <= TWO_PI)
        return _r * _s * bump * inside

    def sampler(rng, _c=center, _s=scale):
        while True:
            theta = _c + (rng.random() + rng.random() - 1.0) / _s
            if 0.0 <= theta <= TWO_PI:
                return theta

    return BasicDistribution(1, density, sampler, "angle", {"index": index, "n": n})


def make_angle_basis(n: int) -> MixtureBasis:
    """Triangle components of width 2pi/n centered at 2pi(i-1)/n, i = 1..n."""
    if n < 1:
        raise ValueError("angle basis needs n >= 1")
    return MixtureBasis(tuple(_angle_component(i, n) for i in range(1, n + 1)))


def _gauss_uniform_component(lam: float, v_dim: int) -> BasicDistribution:
    # point layout: w[:v_dim] = v (entrywise N(0, 1/lam^2)), w[v_dim] = b
    # (uniform on [0, 2pi]); density computed in log space to survive v_dim
    # in the hundreds.
    log_norm = v_dim * (math.log(lam) - 0.5 * math.log(TWO_PI)) - math.log(TWO_PI)

    def density(w, _lam=lam, _d=v_dim, _ln=log_norm):
        point = np.asarray(w, dtype=float)
        if point.shape != (_d + 1,):
            raise ValueError(f"expected a point of shape ({_d + 1},), got {point.shape}")
        b = point[_d]
        if not (0.0 <= b <= TWO_PI):
            return 0.0
        v = point[:_d]
        return math.exp(_ln - 0.5 * _lam * _lam * float(v @ v))

    def sampler(rng, _lam=lam, _d=v_dim):
        v = rng.standard_normal(_d) / _lam
        b = rng.uniform(0.0, TWO_PI)
        return np.concatenate([v, [b]])

    return BasicDistribution(v_dim + 1, density, sampler, "gauss-uniform",
                             {"lam": float(lam), "v_dim": v_dim})


def make_gauss_uniform_basis(lambdas, v_dim: int) -> MixtureBasis:
    """Components with v entrywise N(0, 1/lam_i^2) and phase b uniform on [0, 2pi]."""
    lams = [float(l) for l in np.atleast_1d(np.asarray(lambdas, dtype=float))]
    if len(lams) == 0:
        raise ValueError("need at least one lambda")
    if any(not (l > 0.0 and math.isfinite(l)) for l in lams):
        raise ValueError("every lambda must be positive and finite")
    if v_dim < 1:
        raise ValueError("v_dim must be >= 1")
    return MixtureBasis(tuple(_gauss_uniform_component(l, v_dim) for l in lams))


def build_component(label: str, params: dict) -> BasicDistribution:
    """Rebuild a component from its serialized (label, params) pair."""
    try:
        if label == "angle":
            return _angle_component(int(params["index"]), int(params["n"]))
        if label == "gauss-uniform":
            return _gauss_uniform_component(float(params["lam"]), int(params["v_dim"]))
        if label.startswith("scaled-"):
            kind = label[len("scaled-"):]
            if kind not in ENVELOPE_KINDS:
                raise ValueError(f"unknown envelope kind {kind!r}")
            radius = float(params.get("radius", 3.0))
            return scaled_translated(Envelope(kind, radius),
                                     float(params["sigma"]), float(params["mu"]))
    except KeyError as missing:
        raise ValueError(f"component {label!r} is missing parameter {missing}") from None
    raise ValueError(f"unknown component label {label!r}")


def _check_lengths(basis: MixtureBasis, alpha) -> np.ndarray:
    w = np.asarray(alpha, dtype=float)
    if w.size != basis.n:
        raise ValueError(f"alpha has length {w.size}, basis has {basis.n} components")
    return w


def mixture_density(basis: MixtureBasis, alpha, w):
    """Sum_i alpha_i * density_i(w)."""
    weights = _check_lengths(basis, alpha)
    total = weights[0] * np.asarray(basis.components[0].density(w), dtype=float)
    for wi, comp in zip(weights[1:], basis.components[1:]):
        total = total + wi * np.asarray(comp.density(w), dtype=float)
    return total


def sample_mixture(basis: MixtureBasis, alpha, rng: np.random.Generator):
    """Draw the component index from alpha, then a point from that component."""
    weights = _check_lengths(basis, alpha)
    return basis.components[sample_categorical(weights, rng)].sampler(rng)


def sample_product(basis: MixtureBasis, alpha, node_count: int, rng: np.random.Generator) -> np.ndarray:
    """node_count independent mixture draws (product mode; 1-d bases only)."""
    if basis.dimension != 1:
        raise ValueError("product sampling is defined for 1-dimensional bases only")
    if node_count < 1:
        raise ValueError("node_count must be >= 1")
    weights = _check_lengths(basis, alpha)
    return np.array([sample_mixture(basis, weights, rng) for _ in range(node_count)], dtype=float)
