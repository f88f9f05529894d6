"""Projected gradient descent over mixture coefficients, with ensemble inference.

One training step: estimate the ensemble mean u-bar from R mixture draws,
form the raw gradient g_i = <dJ/du(u-bar), mean of S fresh models drawn
entirely from component i>, normalize g-hat = (1/n)(g - mean g)/std g, and
update alpha <- Proj_simplex(alpha - lr * g-hat). Training stops at k_max
steps, when ||g-hat|| < tol, or when the gradient is flagged stationary
(std below 1e-12).

Modes. "joint": one component index per sampled model, the full parameter
vector drawn from that component (the objective l(alpha) is convex).
"product" (1-d bases only): every node's parameter drawn independently from
the mixture. The per-component gradient draw is the joint-style draw in both
modes; under product mode that is the literal Algorithm-1 estimator, kept as
the stated heuristic rather than the exact derivative of the product
objective.

Randomness. Streams derive from (seed, step, purpose) and one child is
spawned per draw, so results are bitwise reproducible and independent of
scheduling; loss draws never share a stream with gradient draws.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import MixtureBasis, build_component, sample_product
from .data import ClassificationDataset, RegressionDataset
from .inner import RIDGE, ridge_lsq_batch, solve_outer_adam, solve_outer_lsq
from .model import (AngleReluNet, CosineFeatureNet, ModelFunction, angle_feature_tensor,
                    as_model_function, cosine_feature_matrix)
from .simplex import SimplexVector, project_to_simplex, sample_categorical

__all__ = [
    "TrainConfig",
    "TrainState",
    "TrainedMixture",
    "StepRecord",
    "EngineError",
    "make_world",
    "draw_model",
    "estimate_ensemble",
    "estimate_gradient",
    "normalize_gradient",
    "MonteCarloEstimator",
    "train",
    "predict",
    "save_mixture",
    "load_mixture",
]

MIXTURE_FORMAT = "mixtrain mixture v1"
ARTIFACT_VERSION = "0.1.0"
STATIONARY_STD = 1e-12

_INIT, _LOSS, _GRAD = 0, 1, 2

MODES = ("joint", "product")


class EngineError(RuntimeError):
    """Non-finite intermediate during training; records the offending step."""

    def __init__(self, step: int, what: str) -> None:
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step


def _stream(seed: int, step: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, step, purpose))))


@dataclass(frozen=True)
class TrainConfig:
    R: int
    k_max: int
    lr: float
    tol: float = 0.0
    S: int = 1
    seed: int = 0
    mode: str = "joint"
    node_count: int = 1
    ridge: float = RIDGE
    inner_epochs: int = 2
    inner_lr: float = 1e-3
    inner_batch: int = 100

    def __post_init__(self) -> None:
        if self.R < 1 or self.S < 1:
            raise ValueError("R and S must be >= 1")
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if not self.lr > 0.0:
            raise ValueError("lr must be > 0")
        if self.tol < 0.0:
            raise ValueError("tol must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class StepRecord:
    step: int
    loss_estimate: float
    raw_gradient: np.ndarray
    grad_norm: float
    alpha: SimplexVector
    wall_time: float


@dataclass(frozen=True)
class TrainState:
    alpha: SimplexVector
    step: int
    status: str
    history: tuple[StepRecord, ...]


@dataclass(frozen=True)
class TrainedMixture:
    basis: MixtureBasis | None
    alpha: SimplexVector
    mode: str
    node_count: int
    seed: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.basis is not None and self.basis.n != len(self.alpha):
            raise ValueError("basis length and alpha length disagree")


class AngleReluWorld:
    """Relu angle nets over a 1-d basis; the outer layer comes from the ridge solve."""

    def __init__(self, basis: MixtureBasis, dataset: RegressionDataset,
                 node_count: int, ridge: float = RIDGE) -> None:
        if basis.dimension != 1:
            raise ValueError("angle nets need a 1-dimensional basis")
        self.basis = basis
        self.dataset = dataset
        self.node_count = node_count
        self.ridge = ridge
        self.n = basis.n
        self.labels = dataset.labels

    def _component_thetas(self, index: int, rng: np.random.Generator) -> np.ndarray:
        comp = self.basis.components[index]
        return np.array([comp.sampler(rng) for _ in range(self.node_count)], dtype=float)

    def _draw_thetas(self, alpha: np.ndarray, mode: str, rng: np.random.Generator) -> np.ndarray:
        if mode == "product":
            return sample_product(self.basis, alpha, self.node_count, rng)
        return self._component_thetas(sample_categorical(alpha, rng), rng)

    def _predictions(self, thetas: np.ndarray, at: np.ndarray | None) -> np.ndarray:
        feats = angle_feature_tensor(thetas, self.dataset.inputs)
        coefs = ridge_lsq_batch(feats, self.dataset.labels, self.ridge)
        if at is not None:
            feats = angle_feature_tensor(thetas, np.asarray(at, dtype=float))
        return np.einsum("bmn,bn->bm", feats, coefs)

    def sample_models(self, alpha, mode, rngs, at=None) -> np.ndarray:
        thetas = np.stack([self._draw_thetas(alpha, mode, r) for r in rngs])
        return self._predictions(thetas, at)

    def component_models(self, index, rngs) -> np.ndarray:
        thetas = np.stack([self._component_thetas(index, r) for r in rngs])
        return self._predictions(thetas, None)

    def model_fn(self, alpha, mode, rng) -> ModelFunction:
        thetas = self._draw_thetas(alpha, mode, rng)
        outer, _ = solve_outer_lsq(thetas, self.dataset, self.ridge)
        return as_model_function(AngleReluNet(thetas, outer))


class CosineWorld:
    """Cosine-feature nets; node parameters (v, b) per component, inner Adam solve."""

    def __init__(self, basis: MixtureBasis, dataset: ClassificationDataset, node_count: int,
                 inner_epochs: int = 2, inner_lr: float = 1e-3, inner_batch: int = 100) -> None:
        if basis.dimension != dataset.input_dim + 1:
            raise ValueError(
                f"basis dimension {basis.dimension} does not match inputs of dim "
                f"{dataset.input_dim} (need v_dim + 1)")
        self.basis = basis
        self.dataset = dataset
        self.node_count = node_count
        self.inner_epochs = inner_epochs
        self.inner_lr = inner_lr
        self.inner_batch = inner_batch
        self.n = basis.n
        self.labels = dataset.labels

    def _component_params(self, index: int, rng: np.random.Generator):
        comp = self.basis.components[index]
        draws = np.stack([np.asarray(comp.sampler(rng), dtype=float)
                          for _ in range(self.node_count)])
        return draws[:, :-1], draws[:, -1]

    def _draw_net(self, alpha, mode, rng) -> CosineFeatureNet:
        if mode != "joint":
            raise ValueError("cosine nets support joint mode only (basis is not 1-d)")
        freq, phase = self._component_params(sample_categorical(alpha, rng), rng)
        outer, bias, _ = solve_outer_adam(freq, phase, self.dataset, self.inner_epochs,
                                          self.inner_lr, self.inner_batch, rng)
        return CosineFeatureNet(freq, phase, outer, bias)

    def _net_from_component(self, index: int, rng) -> CosineFeatureNet:
        freq, phase = self._component_params(index, rng)
        outer, bias, _ = solve_outer_adam(freq, phase, self.dataset, self.inner_epochs,
                                          self.inner_lr, self.inner_batch, rng)
        return CosineFeatureNet(freq, phase, outer, bias)

    def _logits(self, net: CosineFeatureNet, at) -> np.ndarray:
        inputs = self.dataset.inputs if at is None else np.asarray(at, dtype=float)
        return cosine_feature_matrix(net.freq, net.phase, inputs) @ net.outer + net.bias[None, :]

    def sample_models(self, alpha, mode, rngs, at=None) -> np.ndarray:
        return np.stack([self._logits(self._draw_net(alpha, mode, r), at) for r in rngs])

    def component_models(self, index, rngs) -> np.ndarray:
        return np.stack([self._logits(self._net_from_component(index, r), None) for r in rngs])

    def model_fn(self, alpha, mode, rng) -> ModelFunction:
        return as_model_function(self._draw_net(alpha, mode, rng))


def make_world(basis, dataset, node_count: int, *, ridge: float = RIDGE,
               inner_epochs: int = 2, inner_lr: float = 1e-3, inner_batch: int = 100):
    """Model world for a (basis, dataset) pair.

    Objects exposing as_model_world() (the oracle's DiscreteInstance) supply
    their own world and ignore the basis argument.
    """
    if hasattr(dataset, "as_model_world"):
        return dataset.as_model_world()
    if isinstance(dataset, RegressionDataset):
        return AngleReluWorld(basis, dataset, node_count, ridge)
    if isinstance(dataset, ClassificationDataset):
        return CosineWorld(basis, dataset, node_count, inner_epochs, inner_lr, inner_batch)
    raise TypeError(f"no model world for dataset type {type(dataset).__name__}")


def _as_weights(alpha, n: int) -> np.ndarray:
    w = alpha.weights if isinstance(alpha, SimplexVector) else SimplexVector(alpha).weights
    if w.size != n:
        raise ValueError(f"alpha has length {w.size}, world has {n} components")
    return w


def draw_model(basis, alpha, mode, node_count, rng, dataset, **world_kwargs) -> ModelFunction:
    """One model drawn from the mixture, inner parameters completed."""
    world = make_world(basis, dataset, node_count, **world_kwargs)
    return world.model_fn(_as_weights(alpha, world.n), mode, rng)


def estimate_ensemble(basis, alpha, R, mode, node_count, rng, dataset,
                      world=None, **world_kwargs) -> np.ndarray:
    """Mean prediction of R mixture draws at the dataset inputs."""
    if R < 1:
        raise ValueError("R must be >= 1")
    world = world if world is not None else make_world(basis, dataset, node_count, **world_kwargs)
    preds = world.sample_models(_as_weights(alpha, world.n), mode, rng.spawn(R))
    return preds.mean(axis=0)


def estimate_gradient(ubar, basis, S, mode, node_count, rng, dataset, loss,
                      world=None, **world_kwargs) -> np.ndarray:
    """Raw gradient g_i = <dJ/du(u-bar), mean of S fresh component-i models>.

    The component draws are joint-style regardless of mode (see module
    docstring); the inner product sums over samples and classes.
    """
    if S < 1:
        raise ValueError("S must be >= 1")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    world = world if world is not None else make_world(basis, dataset, node_count, **world_kwargs)
    grad_outer = loss.functional_gradient(np.asarray(ubar, dtype=float), world.labels)
    children = rng.spawn(world.n * S)
    g = np.empty(world.n)
    for i in range(world.n):
        preds = world.component_models(i, children[i * S:(i + 1) * S])
        g[i] = float(np.vdot(grad_outer, preds.mean(axis=0)))
    return g


def normalize_gradient(g) -> tuple[np.ndarray, bool]:
    """(1/n)(g - mean)/std with population std; zero vector + flag when std < 1e-12."""
    raw = np.asarray(g, dtype=float)
    if raw.ndim != 1 or raw.size < 1:
        raise ValueError("gradient must be a 1-d vector")
    std = float(raw.std())
    if std < STATIONARY_STD:
        return np.zeros_like(raw), True
    return (raw - raw.mean()) / (std * raw.size), False


class MonteCarloEstimator:
    """Per-step ensemble and gradient estimates for train(), via a model world."""

    def __init__(self, world, loss, R: int, S: int, mode: str) -> None:
        self.world = world
        self.loss = loss
        self.R = R
        self.S = S
        self.mode = mode
        self.n = world.n
        self.labels = world.labels

    def ensemble(self, alpha, rng) -> np.ndarray:
        return estimate_ensemble(None, alpha, self.R, self.mode, None, rng, None, world=self.world)

    def gradient(self, ubar, alpha, rng) -> np.ndarray:
        return estimate_gradient(ubar, None, self.S, self.mode, None, rng, None, self.loss,
                                 world=self.world)


def train(config: TrainConfig, basis, loss, dataset, alpha0=None,
          estimator=None) -> tuple[TrainedMixture, TrainState]:
    """Algorithm-1 projected gradient descent; returns the mixture and full history.

    alpha0 defaults to a normalized uniform-random vector drawn from the
    (seed, 0, init) stream. Passing `estimator` overrides the Monte-Carlo
    estimates (oracle mode: exact ensembles/gradients on a DiscreteInstance).
    """
    if estimator is None:
        world = make_world(basis, dataset, config.node_count, ridge=config.ridge,
                           inner_epochs=config.inner_epochs, inner_lr=config.inner_lr,
                           inner_batch=config.inner_batch)
        estimator = MonteCarloEstimator(world, loss, config.R, config.S, config.mode)
    n = estimator.n

    if alpha0 is None:
        raw = _stream(config.seed, 0, _INIT).random(n)
        alpha = SimplexVector(raw / raw.sum())
    else:
        alpha = alpha0 if isinstance(alpha0, SimplexVector) else SimplexVector(alpha0)
        if len(alpha) != n:
            raise ValueError(f"alpha0 has length {len(alpha)}, needs {n}")

    records: list[StepRecord] = []
    status = "max-steps"
    for step in range(config.k_max):
        started = time.perf_counter()
        ubar = estimator.ensemble(alpha, _stream(config.seed, step, _LOSS))
        if not np.all(np.isfinite(ubar)):
            raise EngineError(step, "ensemble estimate")
        loss_estimate = loss.value(ubar, estimator.labels)
        g = estimator.gradient(ubar, alpha, _stream(config.seed, step, _GRAD))
        if not np.all(np.isfinite(g)):
            raise EngineError(step, "gradient estimate")
        ghat, stationary = normalize_gradient(g)
        grad_norm = float(np.linalg.norm(ghat))
        records.append(StepRecord(step, loss_estimate, g, grad_norm, alpha,
                                  time.perf_counter() - started))
        if stationary:
            status = "stationary"
            break
        if grad_norm < config.tol:
            status = "converged"
            break
        alpha = project_to_simplex(alpha.weights - config.lr * ghat)

    provenance = {"train": asdict(config)}
    trained = TrainedMixture(basis if isinstance(basis, MixtureBasis) else None, alpha,
                             config.mode, config.node_count, config.seed, provenance)
    return trained, TrainState(alpha, len(records), status, tuple(records))


def predict(trained: TrainedMixture, inputs, R: int, rng, dataset,
            **world_kwargs) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean of R mixture draws at `inputs`, plus its Monte-Carlo
    standard error (sample std over draws, ddof=0, divided by sqrt(R)).

    `dataset` is the training set: the inner solves completing each sampled
    model run against it.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    world = make_world(trained.basis, dataset, trained.node_count, **world_kwargs)
    preds = world.sample_models(_as_weights(trained.alpha, world.n), trained.mode,
                                rng.spawn(R), at=np.asarray(inputs, dtype=float))
    return preds.mean(axis=0), preds.std(axis=0, ddof=0) / np.sqrt(R)


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        raise ValueError("boolean component parameters are not serializable")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def save_mixture(trained: TrainedMixture, path) -> None:
    """Flat text serialization; floats via repr so the round-trip is exact."""
    if trained.basis is None:
        raise ValueError("cannot serialize a mixture without a rebuildable basis")
    lines = [f"# {MIXTURE_FORMAT}",
             f"mode {trained.mode}",
             f"n {trained.basis.n}",
             f"node_count {trained.node_count}",
             f"seed {trained.seed}",
             f"provenance {json.dumps(trained.provenance, sort_keys=True)}",
             f"artifact_version {ARTIFACT_VERSION}"]
    for comp in trained.basis.components:
        if comp.params is None:
            raise ValueError(f"component {comp.label!r} carries no rebuild parameters")
        pairs = " ".join(f"{k}={_format_value(v)}" for k, v in sorted(comp.params.items()))
        lines.append(f"component {comp.label} {pairs}".rstrip())
    lines.append("alpha " + " ".join(repr(float(a)) for a in trained.alpha.weights))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mixture(path) -> TrainedMixture:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != f"# {MIXTURE_FORMAT}":
        raise ValueError(f"{path}: not a '{MIXTURE_FORMAT}' file")
    fields: dict = {}
    components = []
    alpha = None
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "component":
            label, _, pairs = rest.partition(" ")
            params = {}
            for pair in pairs.split():
                name, _, value = pair.partition("=")
                params[name] = int(value) if value.lstrip("+-").isdigit() else float(value)
            components.append(build_component(label, params))
        elif key == "alpha":
            alpha = np.array([float(v) for v in rest.split()])
        elif key == "provenance":
            fields["provenance"] = json.loads(rest)
        else:
            fields[key] = rest
    if alpha is None or not components:
        raise ValueError(f"{path}: missing component or alpha lines")
    return TrainedMixture(MixtureBasis(tuple(components)), SimplexVector.exact(alpha),
                          fields["mode"], int(fields["node_count"]), int(fields["seed"]),
                          fields.get("provenance", {}))
