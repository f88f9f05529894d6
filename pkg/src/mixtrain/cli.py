"""Command-line front end.

Subcommands: train-dist (mixture training), train-baseline, sweep, infer,
verify. Configuration is a JSON file; the only environment variable honored
is MIXTRAIN_OUT, which overrides the output directory (--out wins over both).
Every output file starts with provenance comment lines: config hash, seed,
artifact version.

Exit codes: 0 success, 1 a verification check failed, 2 bad configuration or
usage, 3 runtime failure (divergence, corrupt data files, non-finite loss).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .baseline import (BaselineConfig1D, BaselineConfigMnist, eval_leaky_angle_net,
                       sweep, train_adam_cosine_net, train_sgd_angle_net)
from .basis import make_angle_basis, make_gauss_uniform_basis
from .data import (ClassificationDataset, IdxFormatError, MNIST_CLASSES, gen_target,
                   load_mnist_idx, sample_regression, subset)
from .engine import (ARTIFACT_VERSION, EngineError, TrainConfig, load_mixture, predict,
                     save_mixture, train)
from .loss import EmpiricalL2, SoftmaxCrossEntropy
from .model import cosine_feature_matrix
from .oracle import verification_suite

__all__ = ["main", "ConfigError"]


class ConfigError(Exception):
    pass


_MISSING = object()


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: line {err.lineno} "
                          f"column {err.colno}: {err.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object at top level")
    return cfg


def _dig(cfg: dict, path: str):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing config key '{path}'")
        node = node[part]
    return node


def _get(cfg: dict, path: str, kind, default=_MISSING):
    try:
        value = _dig(cfg, path)
    except ConfigError:
        if default is _MISSING:
            raise
        return default
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is not bool and isinstance(value, bool):
        raise ConfigError(f"config key '{path}' must be {kind.__name__}, got a boolean")
    if not isinstance(value, kind):
        raise ConfigError(
            f"config key '{path}' must be {kind.__name__}, got {type(value).__name__}")
    return value


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _provenance_lines(cfg_hash: str, seed: int) -> list[str]:
    return [f"# config_hash {cfg_hash}",
            f"# seed {seed}",
            f"# artifact_version {ARTIFACT_VERSION}"]


def _write_csv(path, header_lines, fieldnames, rows) -> None:
    # floats go through repr: full precision, locale independent
    def cell(v):
        return repr(float(v)) if isinstance(v, float) else v

    with open(path, "w", newline="") as fh:
        for ln in header_lines:
            fh.write(ln + "\n")
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([cell(v) for v in row])


def _resolve_out(args, cfg: dict) -> str:
    out = args.out or os.environ.get("MIXTRAIN_OUT") or _get(cfg, "out", str, "out")
    os.makedirs(out, exist_ok=True)
    return out


def _effective(cfg: dict, args) -> dict:
    cfg = json.loads(json.dumps(cfg))
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise ConfigError("config key 'seed' must be a non-negative integer")
    return cfg


def _alpha_entropy(weights: np.ndarray) -> float:
    nz = weights[weights > 0.0]
    return float(-(nz * np.log(nz)).sum())


def _build_regression(cfg: dict):
    target = gen_target(_get(cfg, "data.K", int), _get(cfg, "data.jump", float),
                        _get(cfg, "data.target_seed", int, 0))
    data_seed = _get(cfg, "data.data_seed", int, 1)
    train_set = sample_regression(target, _get(cfg, "data.train_size", int), data_seed)
    test_set = sample_regression(target, _get(cfg, "data.test_size", int), data_seed + 1)
    return target, train_set, test_set


def _load_mnist_pair(cfg: dict, images_key: str, labels_key: str, subset_key: str,
                     seed: int) -> ClassificationDataset:
    images = _get(cfg, images_key, str)
    labels = _get(cfg, labels_key, str)
    for path in (images, labels):
        if not os.path.exists(path):
            raise ConfigError(f"data file does not exist: {path}")
    dataset = load_mnist_idx(images, labels)
    count = _get(cfg, subset_key, int, 0)
    if count:
        dataset = subset(dataset, count, seed)
    return dataset


def _build_mnist(cfg: dict, seed: int):
    train_set = _load_mnist_pair(cfg, "data.images", "data.labels", "data.subset", seed)
    test_set = _load_mnist_pair(cfg, "data.test_images", "data.test_labels",
                                "data.test_subset", seed + 1)
    return train_set, test_set


def _build_basis(cfg: dict, experiment: str):
    kind = _get(cfg, "basis.kind", str)
    if experiment == "regress1d":
        if kind != "angle":
            raise ConfigError("config key 'basis.kind' must be 'angle' for regress1d")
        return make_angle_basis(_get(cfg, "basis.n", int))
    if kind != "gauss-uniform":
        raise ConfigError("config key 'basis.kind' must be 'gauss-uniform' for mnist-cosine")
    lo = _get(cfg, "basis.lambda_min", float)
    hi = _get(cfg, "basis.lambda_max", float)
    count = _get(cfg, "basis.count", int)
    spacing = _get(cfg, "basis.spacing", str, "geometric")
    if spacing == "geometric":
        lambdas = np.geomspace(lo, hi, count)
    elif spacing == "linear":
        lambdas = np.linspace(lo, hi, count)
    else:
        raise ConfigError("config key 'basis.spacing' must be 'geometric' or 'linear'")
    return make_gauss_uniform_basis(lambdas, _get(cfg, "basis.v_dim", int))


def _train_config(cfg: dict, seed: int) -> TrainConfig:
    try:
        return TrainConfig(
            R=_get(cfg, "train.R", int),
            k_max=_get(cfg, "train.k_max", int),
            lr=_get(cfg, "train.lr", float),
            tol=_get(cfg, "train.tol", float, 0.0),
            S=_get(cfg, "train.S", int, 1),
            seed=seed,
            mode=_get(cfg, "train.mode", str, "joint"),
            node_count=_get(cfg, "train.node_count", int),
            ridge=_get(cfg, "train.ridge", float, 1e-8),
            inner_epochs=_get(cfg, "train.inner_epochs", int, 2),
            inner_lr=_get(cfg, "train.inner_lr", float, 1e-3),
            inner_batch=_get(cfg, "train.inner_batch", int, 100),
        )
    except ValueError as err:
        raise ConfigError(f"bad train section: {err}") from None


def _experiment(cfg: dict) -> str:
    exp = _get(cfg, "experiment", str)
    if exp not in ("regress1d", "mnist-cosine"):
        raise ConfigError("config key 'experiment' must be 'regress1d' or 'mnist-cosine'")
    return exp


def cmd_train_dist(args) -> int:
    cfg = _effective(_load_config(args.config), args)
    out = _resolve_out(args, cfg)
    seed = cfg["seed"]
    cfg_hash = _config_hash(cfg)
    experiment = _experiment(cfg)

    if experiment == "regress1d":
        _, train_set, test_set = _build_regression(cfg)
        loss = EmpiricalL2()
    else:
        train_set, test_set = _build_mnist(cfg, seed)
        loss = SoftmaxCrossEntropy(MNIST_CLASSES)
    basis = _build_basis(cfg, experiment)
    train_cfg = _train_config(cfg, seed)
    if experiment == "mnist-cosine" and train_cfg.mode != "joint":
        raise ConfigError("config key 'train.mode' must be 'joint' for mnist-cosine")

    started = time.perf_counter()
    trained, state = train(train_cfg, basis, loss, train_set)
    wall = time.perf_counter() - started

    provenance = {**trained.provenance, "experiment": experiment,
                  "data": cfg.get("data", {}), "basis": cfg.get("basis", {}),
                  "config_hash": cfg_hash, "artifact_version": ARTIFACT_VERSION}
    trained = replace(trained, provenance=provenance)
    save_mixture(trained, os.path.join(out, "mixture.txt"))

    header = _provenance_lines(cfg_hash, seed)
    rows = [(r.step, float(r.loss_estimate), float(r.grad_norm),
             _alpha_entropy(r.alpha.weights), float(r.wall_time)) for r in state.history]
    _write_csv(os.path.join(out, "metrics.csv"), header,
               ["step", "loss_estimate", "grad_norm", "alpha_entropy", "wall_seconds"], rows)

    eval_rng = np.random.default_rng(np.random.SeedSequence((seed, 2**31, 0)))
    mean_pred, _ = predict(trained, test_set.inputs, train_cfg.R, eval_rng, train_set,
                           ridge=train_cfg.ridge, inner_epochs=train_cfg.inner_epochs,
                           inner_lr=train_cfg.inner_lr, inner_batch=train_cfg.inner_batch)
    test_loss = float(loss.value(mean_pred, test_set.labels))
    final_train = float(state.history[-1].loss_estimate) if state.history else math.nan
    summary = {"config_hash": cfg_hash, "seed": seed, "artifact_version": ARTIFACT_VERSION,
               "experiment": experiment, "status": state.status, "steps": state.step,
               "final_train_loss": final_train, "final_test_loss": test_loss,
               "wall_seconds": wall}
    if experiment == "mnist-cosine":
        summary["test_accuracy"] = float(np.mean(mean_pred.argmax(axis=1)
                                                 == test_set.labels))
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"train-dist {experiment}: status={state.status} steps={state.step} "
          f"train_loss={final_train!r} test_loss={test_loss!r} out={out}")
    return 0


def _baseline_regression_cell(cfg: dict, cell: dict, train_set, test_set) -> dict:
    merged = {"sigma_a": _get(cfg, "baseline.sigma_a", float, 1.0),
              "lr_a": _get(cfg, "baseline.lr_a", float, 1e-3),
              "lr_theta": _get(cfg, "baseline.lr_theta", float, 1e-3),
              "batch_size": _get(cfg, "baseline.batch_size", int, 200),
              "max_steps": _get(cfg, "baseline.max_steps", int, 300_000),
              "eval_every": _get(cfg, "baseline.eval_every", int, 1000),
              "seed": cfg["seed"],
              "node_count": _get(cfg, "baseline.node_count", int)}
    merged.update(cell)
    node_count = int(merged.pop("node_count"))
    try:
        bl_cfg = BaselineConfig1D(**merged)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad baseline section: {err}") from None
    net, history, status = train_sgd_angle_net(bl_cfg, train_set, node_count)
    resid = eval_leaky_angle_net(net, test_set.inputs) - test_set.labels
    return {"status": status,
            "final_train_loss": history[-1][1],
            "final_test_loss": float(resid @ resid) / test_set.size,
            "steps": history[-1][0],
            "history": history}


def _baseline_mnist_cell(cfg: dict, cell: dict, train_set, test_set) -> dict:
    merged = {"scale": _get(cfg, "baseline.scale", float, 1.0),
              "epochs": _get(cfg, "baseline.epochs", int, 30),
              "lr": _get(cfg, "baseline.lr", float, 1e-3),
              "batch_size": _get(cfg, "baseline.batch_size", int, 100),
              "seed": cfg["seed"],
              "node_count": _get(cfg, "baseline.node_count", int)}
    merged.update(cell)
    node_count = int(merged.pop("node_count"))
    try:
        bl_cfg = BaselineConfigMnist(**merged)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad baseline section: {err}") from None
    net, history, status = train_adam_cosine_net(bl_cfg, train_set, node_count)
    logits = cosine_feature_matrix(net.freq, net.phase, test_set.inputs) @ net.outer + net.bias
    loss = SoftmaxCrossEntropy(test_set.class_count)
    return {"status": status,
            "final_train_loss": history[-1][1],
            "final_test_loss": loss.value(logits, test_set.labels),
            "accuracy": float(np.mean(logits.argmax(axis=1) == test_set.labels)),
            "steps": history[-1][0],
            "history": history}


def _baseline_kind(cfg: dict) -> str:
    kind = _get(cfg, "baseline.kind", str)
    if kind not in ("sgd1d", "adam-cosine"):
        raise ConfigError("config key 'baseline.kind' must be 'sgd1d' or 'adam-cosine'")
    return kind


def _baseline_data(cfg: dict, kind: str):
    if kind == "sgd1d":
        _, train_set, test_set = _build_regression(cfg)
    else:
        train_set, test_set = _build_mnist(cfg, cfg["seed"])
    return train_set, test_set


def cmd_train_baseline(args) -> int:
    cfg = _effective(_load_config(args.config), args)
    out = _resolve_out(args, cfg)
    cfg_hash = _config_hash(cfg)
    kind = _baseline_kind(cfg)
    train_set, test_set = _baseline_data(cfg, kind)
    cell_fn = _baseline_regression_cell if kind == "sgd1d" else _baseline_mnist_cell
    result = cell_fn(cfg, {}, train_set, test_set)

    header = _provenance_lines(cfg_hash, cfg["seed"])
    unit = "step" if kind == "sgd1d" else "epoch"
    _write_csv(os.path.join(out, "metrics.csv"), header, [unit, "train_loss"],
               [(s, float(v)) for s, v in result.pop("history")])
    summary = {"config_hash": cfg_hash, "seed": cfg["seed"],
               "artifact_version": ARTIFACT_VERSION, "baseline": kind, **result}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"train-baseline {kind}: status={result['status']} "
          f"train_loss={result['final_train_loss']!r} "
          f"test_loss={result['final_test_loss']!r} out={out}")
    if result["status"] == "diverged":
        return 3
    return 0


def cmd_sweep(args) -> int:
    cfg = _effective(_load_config(args.config), args)
    out = _resolve_out(args, cfg)
    cfg_hash = _config_hash(cfg)
    kind = _baseline_kind(cfg)
    grid = _get(cfg, "sweep.grid", dict)
    if not grid or not all(isinstance(v, list) and v for v in grid.values()):
        raise ConfigError("config key 'sweep.grid' must map names to non-empty lists")
    train_set, test_set = _baseline_data(cfg, kind)
    cell_fn = _baseline_regression_cell if kind == "sgd1d" else _baseline_mnist_cell

    def run_cell(cell: dict) -> dict:
        result = cell_fn(cfg, cell, train_set, test_set)
        result.pop("history", None)
        return result

    results_path = os.path.join(out, "results.csv")
    rows = sweep(grid, run_cell, results_path, jobs=args.jobs)

    with open(results_path) as fh:
        body = fh.read()
    with open(results_path, "w") as fh:
        fh.write("\n".join(_provenance_lines(cfg_hash, cfg["seed"])) + "\n" + body)

    errors = sum(1 for r in rows if r.get("status") == "error")
    diverged = sum(1 for r in rows if r.get("status") == "diverged")
    best = next((r for r in rows if r.get("best") == 1), None)
    best_txt = f" best={best['config_id']}" if best else ""
    print(f"sweep {kind}: {len(rows) - errors - diverged}/{len(rows)} completed "
          f"({diverged} diverged, {errors} errors){best_txt} out={out}")
    return 0


def cmd_infer(args) -> int:
    cfg = _effective(_load_config(args.config), args)
    out = _resolve_out(args, cfg)
    cfg_hash = _config_hash(cfg)
    mixture_path = args.mixture or _get(cfg, "infer.mixture", str)
    if not os.path.exists(mixture_path):
        raise ConfigError(f"mixture file does not exist: {mixture_path}")
    try:
        trained = load_mixture(mixture_path)
    except (ValueError, KeyError) as err:
        raise ConfigError(f"cannot load mixture: {err}") from None

    prov = trained.provenance
    experiment = prov.get("experiment")
    data_cfg = {"data": prov.get("data", {}), "seed": trained.seed}
    if experiment == "regress1d":
        _, train_set, _ = _build_regression(data_cfg)
        inputs = _infer_inputs_1d(cfg)
    elif experiment == "mnist-cosine":
        train_set = _load_mnist_pair(data_cfg, "data.images", "data.labels",
                                     "data.subset", trained.seed)
        inputs = _load_mnist_pair(cfg, "infer.images", "infer.labels",
                                  "infer.subset", cfg["seed"]).inputs
    else:
        raise ConfigError("mixture file carries no rebuildable experiment provenance")

    R = _get(cfg, "infer.R", int, 50)
    inner = prov.get("train", {})
    rng = np.random.default_rng(np.random.SeedSequence((cfg["seed"], 2**31, 1)))
    mean, std_err = predict(trained, inputs, R, rng, train_set,
                            ridge=inner.get("ridge", 1e-8),
                            inner_epochs=inner.get("inner_epochs", 2),
                            inner_lr=inner.get("inner_lr", 1e-3),
                            inner_batch=inner.get("inner_batch", 100))

    header = _provenance_lines(cfg_hash, cfg["seed"])
    path = os.path.join(out, "predictions.csv")
    if mean.ndim == 1:
        rows = [(float(x), float(mu), float(se))
                for x, mu, se in zip(np.asarray(inputs).ravel(), mean, std_err)]
        _write_csv(path, header, ["input", "mean", "std_err"], rows)
    else:
        classes = mean.shape[1]
        fields = ["row", "argmax"] + [f"mean_{c}" for c in range(classes)] \
            + [f"std_err_{c}" for c in range(classes)]
        rows = [(i, int(mean[i].argmax()), *map(float, mean[i]), *map(float, std_err[i]))
                for i in range(mean.shape[0])]
        _write_csv(path, header, fields, rows)
    print(f"infer: {mean.shape[0]} predictions with R={R} out={out}")
    return 0


def _infer_inputs_1d(cfg: dict) -> np.ndarray:
    try:
        explicit = _dig(cfg, "infer.inputs")
    except ConfigError:
        explicit = None
    if explicit is not None:
        if not isinstance(explicit, list) or not explicit \
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                           for v in explicit):
            raise ConfigError("config key 'infer.inputs' must be a non-empty number list")
        return np.asarray(explicit, dtype=float)
    lo = _get(cfg, "infer.grid.from", float, -1.0)
    hi = _get(cfg, "infer.grid.to", float, 1.0)
    count = _get(cfg, "infer.grid.count", int, 201)
    if count < 1 or not hi > lo:
        raise ConfigError("config key 'infer.grid' needs count >= 1 and to > from")
    return np.linspace(lo, hi, count)


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    out = args.out or os.environ.get("MIXTRAIN_OUT")
    checks = verification_suite(seed)
    lines = [f"{c.name} statistic={c.statistic!r} threshold={c.threshold!r} "
             f"{'pass' if c.passed else 'FAIL'}" for c in checks]
    for ln in lines:
        print(ln)
    if out:
        os.makedirs(out, exist_ok=True)
        header = _provenance_lines(_config_hash({"verify_seed": seed}), seed)
        with open(os.path.join(out, "verify_report.txt"), "w") as fh:
            fh.write("\n".join(header + lines) + "\n")
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixtrain",
        description="train mixture distributions over network parameters by "
                    "projected gradient descent, with baselines and exact "
                    "small-instance verification")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None, help="output directory "
                       "(overrides MIXTRAIN_OUT and the config)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker threads for sweeps")

    p = sub.add_parser("train-dist", help="train a mixture by projected gradient")
    common(p)
    p.set_defaults(func=cmd_train_dist)

    p = sub.add_parser("train-baseline", help="train a conventional baseline")
    common(p)
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("sweep", help="grid-sweep baseline hyperparameters")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("infer", help="ensemble predictions from a trained mixture")
    common(p)
    p.add_argument("--mixture", default=None, help="trained mixture file "
                   "(defaults to config key 'infer.mixture')")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("verify", help="run the exact verification suite")
    common(p, config_required=False)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (EngineError, IdxFormatError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3
    except OSError as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
