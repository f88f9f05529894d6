"""Conventional gradient-descent baselines and a hyperparameter grid sweep.

Two reference trainings for the same hypothesis classes the mixture engine
uses: plain minibatch SGD on (outer weights, angles) of a leaky-relu angle
net, and Adam on all parameters of a cosine-feature net. Both report a status
rather than raising when the loss blows up, so a sweep over bad learning
rates records "diverged" cells instead of dying.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import ClassificationDataset, RegressionDataset
from .inner import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from .loss import SoftmaxCrossEntropy
from .model import CosineFeatureNet, cosine_feature_matrix

__all__ = [
    "BaselineConfig1D",
    "BaselineConfigMnist",
    "LeakyAngleNet",
    "eval_leaky_angle_net",
    "train_sgd_angle_net",
    "train_adam_cosine_net",
    "sweep",
]

DIVERGENCE_THRESHOLD = 1e12
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class BaselineConfig1D:
    sigma_a: float
    lr_a: float
    lr_theta: float
    batch_size: int = 200
    max_steps: int = 300_000
    eval_every: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma_a < 0 or self.lr_a <= 0 or self.lr_theta <= 0:
            raise ValueError("sigma_a must be >= 0 and both learning rates > 0")
        if self.batch_size < 1 or self.max_steps < 0 or self.eval_every < 1:
            raise ValueError("batch_size/eval_every must be >= 1 and max_steps >= 0")


@dataclass(frozen=True)
class BaselineConfigMnist:
    scale: float = 1.0
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scale <= 0 or self.lr <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("scale and lr must be > 0, epochs >= 0, batch_size >= 1")


@dataclass(frozen=True)
class LeakyAngleNet:
    """Angle net with leaky-relu activation (the SGD baseline trains this;
    the zero-slope variant in module model is what the mixture engine uses)."""

    thetas: np.ndarray
    outer: np.ndarray
    slope: float = LEAKY_SLOPE

    def __post_init__(self) -> None:
        object.__setattr__(self, "thetas", np.asarray(self.thetas, dtype=float))
        object.__setattr__(self, "outer", np.asarray(self.outer, dtype=float))
        if self.thetas.shape != self.outer.shape or self.thetas.ndim != 1:
            raise ValueError("thetas and outer must be 1-d arrays of equal length")


def eval_leaky_angle_net(net: LeakyAngleNet, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    z = np.cos(net.thetas)[None, :] * x[:, None] + np.sin(net.thetas)[None, :]
    return np.where(z > 0.0, z, net.slope * z) @ net.outer


def _mean_sq(net: LeakyAngleNet, dataset: RegressionDataset) -> float:
    r = eval_leaky_angle_net(net, dataset.inputs) - dataset.labels
    return float(r @ r) / dataset.size


def train_sgd_angle_net(config: BaselineConfig1D, dataset: RegressionDataset,
                        node_count: int):
    """Minibatch SGD on squared error over (outer, thetas).

    Init: outer ~ N(0, sigma_a^2); thetas = arctan(U[-1, 1]) plus a fair coin
    times pi, wrapped to [0, 2pi). Angles wrap mod 2pi after every step, so
    they stay identifiable. Returns (net, history, status) with history rows
    (step, full-train loss) every eval_every steps; status is one of
    "max-steps" or "diverged".
    """
    rng = np.random.default_rng(config.seed)
    outer = config.sigma_a * rng.standard_normal(node_count)
    thetas = np.arctan(rng.uniform(-1.0, 1.0, node_count)) \
        + math.pi * rng.integers(0, 2, node_count)
    thetas %= 2.0 * math.pi

    x, y = dataset.inputs, dataset.labels
    batch = min(config.batch_size, dataset.size)
    history: list[tuple[int, float]] = []
    status = "max-steps"

    def snapshot(step: int) -> float:
        value = _mean_sq(LeakyAngleNet(thetas, outer), dataset)
        history.append((step, value))
        return value

    snapshot(0)
    for step in range(1, config.max_steps + 1):
        pick = rng.choice(dataset.size, size=batch, replace=False)
        xb, yb = x[pick], y[pick]
        z = np.cos(thetas)[None, :] * xb[:, None] + np.sin(thetas)[None, :]
        act = np.where(z > 0.0, z, LEAKY_SLOPE * z)
        resid = act @ outer - yb
        dact = np.where(z > 0.0, 1.0, LEAKY_SLOPE)
        grad_outer = (2.0 / batch) * (act.T @ resid)
        dz_dtheta = -np.sin(thetas)[None, :] * xb[:, None] + np.cos(thetas)[None, :]
        grad_theta = (2.0 / batch) * np.einsum("b,j,bj,bj->j", resid, outer, dact, dz_dtheta)
        outer -= config.lr_a * grad_outer
        thetas -= config.lr_theta * grad_theta
        with np.errstate(invalid="ignore"):  # nan thetas flow to the snapshot check
            thetas %= 2.0 * math.pi
        if step % config.eval_every == 0 or step == config.max_steps:
            value = snapshot(step)
            if not math.isfinite(value) or value > DIVERGENCE_THRESHOLD:
                status = "diverged"
                break
    return LeakyAngleNet(thetas, outer), history, status


def _glorot(rng, fan_in: int, fan_out: int, shape, scale: float = 1.0) -> np.ndarray:
    limit = scale * math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def train_adam_cosine_net(config: BaselineConfigMnist, dataset: ClassificationDataset,
                          node_count: int):
    """Adam on every parameter (frequencies, phases, outer, bias) of a cosine
    net under cross-entropy. Returns (net, history, status); history rows are
    (epoch, full-train loss)."""
    rng = np.random.default_rng(config.seed)
    d = dataset.input_dim
    classes = dataset.class_count
    loss = SoftmaxCrossEntropy(classes)

    params = {
        "freq": _glorot(rng, d, node_count, (node_count, d), config.scale),
        "phase": np.zeros(node_count),
        "outer": _glorot(rng, node_count, classes, (node_count, classes)),
        "bias": np.zeros(classes),
    }
    moments = {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in params.items()}

    x, y = dataset.inputs, dataset.labels
    batch = min(config.batch_size, dataset.size)
    history: list[tuple[int, float]] = []
    status = "max-epochs"
    step = 0

    def full_loss() -> float:
        net = CosineFeatureNet(params["freq"], params["phase"], params["outer"],
                               params["bias"])
        logits = cosine_feature_matrix(net.freq, net.phase, x) @ net.outer + net.bias
        return loss.value(logits, y)

    history.append((0, full_loss()))
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(dataset.size)
        for lo in range(0, dataset.size, batch):
            pick = order[lo:lo + batch]
            xb, yb = x[pick], y[pick]
            phases = xb @ params["freq"].T + params["phase"]
            feats = np.cos(phases)
            logits = feats @ params["outer"] + params["bias"]
            dlogits = loss.functional_gradient(logits, yb)
            dfeats = dlogits @ params["outer"].T
            dphases = -np.sin(phases) * dfeats
            grads = {
                "freq": dphases.T @ xb,
                "phase": dphases.sum(axis=0),
                "outer": feats.T @ dlogits,
                "bias": dlogits.sum(axis=0),
            }
            step += 1
            for key, g in grads.items():
                m1, m2 = moments[key]
                m1 += (1.0 - ADAM_BETA1) * (g - m1)
                m2 += (1.0 - ADAM_BETA2) * (g * g - m2)
                hat1 = m1 / (1.0 - ADAM_BETA1 ** step)
                hat2 = m2 / (1.0 - ADAM_BETA2 ** step)
                params[key] -= config.lr * hat1 / (np.sqrt(hat2) + ADAM_EPS)
        value = full_loss()
        history.append((epoch, value))
        if not math.isfinite(value) or value > DIVERGENCE_THRESHOLD:
            status = "diverged"
            break
    net = CosineFeatureNet(params["freq"], params["phase"], params["outer"], params["bias"])
    return net, history, status


def _config_id(cell: dict) -> str:
    return "|".join(f"{k}={cell[k]!r}" for k in sorted(cell))


def _row_fields(names: list[str], rows: list[dict]) -> list[str]:
    keys = ["config_id", *names]
    seen = set(keys)
    for row in rows:
        for k in row:
            if k not in seen:
                seen.add(k)
                keys.append(k)
    return keys


def _read_done(results_path: str) -> dict[str, dict]:
    # finished cells from a previous run: the journal (one JSON row per
    # completed cell) takes precedence, then any finalized wide CSV.
    done: dict[str, dict] = {}
    final = results_path
    journal = results_path + ".journal"
    if os.path.exists(final):
        with open(final, newline="") as fh:
            for row in csv.DictReader(line for line in fh if not line.startswith("#")):
                done[row["config_id"]] = dict(row)
    if os.path.exists(journal):
        with open(journal) as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    done[row["config_id"]] = row
    return done


def sweep(grid: dict, run_cell, results_path=None, jobs: int = 1) -> list[dict]:
    """Cartesian sweep over grid = {name: [values...]} in deterministic order.

    run_cell(cell_dict) -> dict of result fields (must be CSV-scalar). Every
    finished cell is journaled to <results_path>.journal right away, and cells
    already present in the journal or in a finalized CSV are skipped on a
    rerun, so an interrupted sweep resumes where it stopped. Failures are
    recorded with status "error" and never abort the sweep. When all cells
    are in, results_path is written with the lowest-final_test_loss cell
    flagged best=1 (ties to the earlier cell) and the journal is removed.
    """
    names = sorted(grid)
    cells = [dict(zip(names, combo)) for combo in itertools.product(*(grid[k] for k in names))]
    ids = [_config_id(c) for c in cells]
    if len(set(ids)) != len(ids):
        raise ValueError("grid produced duplicate cells")

    done = _read_done(results_path) if results_path is not None else {}

    append_lock = threading.Lock()
    journal = open(results_path + ".journal", "a") if results_path is not None else None

    def evaluate(cell: dict) -> dict:
        started = time.perf_counter()
        row = {"config_id": _config_id(cell), **cell}
        try:
            row.update(run_cell(dict(cell)))
            row.setdefault("status", "ok")
        except Exception as err:  # noqa: BLE001 - sweep must survive bad cells
            row.update(status="error", error=f"{type(err).__name__}: {err}")
        row["wall_seconds"] = time.perf_counter() - started
        if journal is not None:
            with append_lock:
                journal.write(json.dumps(row, sort_keys=True) + "\n")
                journal.flush()
        return row

    try:
        pending = [c for c, i in zip(cells, ids) if i not in done]
        if jobs > 1 and pending:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                fresh = list(pool.map(evaluate, pending))
        else:
            fresh = [evaluate(c) for c in pending]
    finally:
        if journal is not None:
            journal.close()

    by_id = {**done, **{r["config_id"]: r for r in fresh}}
    rows = [dict(by_id[i]) for i in ids]

    losses = []
    for row in rows:
        try:
            losses.append(float(row.get("final_test_loss", "nan")))
        except (TypeError, ValueError):
            losses.append(float("nan"))
    finite = [(v, i) for i, v in enumerate(losses) if math.isfinite(v)]
    best_index = min(finite)[1] if finite else None
    for i, row in enumerate(rows):
        row["best"] = 1 if i == best_index else 0

    if results_path is not None:
        with open(results_path, "w", newline="") as fh:
            out = csv.DictWriter(fh, fieldnames=_row_fields(names, rows),
                                 extrasaction="ignore")
            out.writeheader()
            for row in rows:
                out.writerow({k: repr(v) if isinstance(v, float) else v
                              for k, v in row.items()})
        if os.path.exists(results_path + ".journal"):
            os.remove(results_path + ".journal")
    return rows
