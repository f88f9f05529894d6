"""Brute-force verification on small discrete instances.

A DiscreteInstance freezes everything the training updates would otherwise
sample: M parameter points with precomputed model outputs, n components given
as categorical distributions over those points, labels, and a loss. Mixture
losses and gradients are then exact sums, so the claims behind the trainer
can be checked directly:

  * the joint-mode objective l(alpha) = J[u-bar(alpha)] is convex;
  * mixtures are at least as good as the best single parameter point, and
    exactly as good when the loss is linear, with equality precisely for
    mixtures supported on the argmin points;
  * the exact gradient matches central finite differences;
  * the Monte-Carlo estimators used in training are unbiased for their exact
    counterparts (sample means land in CLT bands);
  * the product-mode objective can be non-convex (a two-node pair instance
    with a measured midpoint violation).

Everything here recomputes from first principles and stays independent of the
engine's estimators, apart from mc_consistency which deliberately feeds the
engine's estimators a discrete world and compares them against the exact
sums.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .model import ModelFunction
from .simplex import SimplexVector, project_to_simplex, sample_categorical

__all__ = [
    "DiscreteInstance",
    "LinearLoss",
    "CheckResult",
    "Prop1Report",
    "LinearCaseReport",
    "ProbeReport",
    "ConsistencyReport",
    "exact_loss",
    "exact_gradient",
    "exact_ensemble",
    "ExactEstimator",
    "verify_prop1",
    "verify_linear_case",
    "convexity_probe",
    "product_mean",
    "product_convexity_probe",
    "nonconvex_pair_demo",
    "mc_consistency",
    "random_instance",
    "make_linear_support_instance",
    "project_by_active_sets",
    "save_instance",
    "load_instance",
    "verification_suite",
]

COMPONENT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LinearLoss:
    """J[u] = <weights, u>; the functional gradient is the constant weights."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("linear loss weights must be finite")
        object.__setattr__(self, "weights", w)

    def value(self, predictions, labels) -> float:
        return float(np.vdot(self.weights, np.asarray(predictions, dtype=float)))

    def functional_gradient(self, predictions, labels) -> np.ndarray:
        return self.weights


@dataclass(frozen=True)
class DiscreteInstance:
    """Exactly summable world: outputs[j] is the full prediction table of the
    model built from parameter point j.

    outputs: (M, m) regression values or (M, m, C) class scores.
    components: (n, M), each row a categorical distribution over the points.
    """

    outputs: np.ndarray
    components: np.ndarray
    labels: np.ndarray
    loss: object

    def __post_init__(self) -> None:
        outputs = np.asarray(self.outputs, dtype=float)
        comps = np.asarray(self.components, dtype=float)
        if outputs.ndim not in (2, 3) or not np.all(np.isfinite(outputs)):
            raise ValueError("outputs must be a finite (M, m) or (M, m, C) array")
        if comps.ndim != 2 or comps.shape[1] != outputs.shape[0]:
            raise ValueError("components must be (n, M) with M matching outputs")
        if np.min(comps) < 0.0 or np.max(np.abs(comps.sum(axis=1) - 1.0)) > COMPONENT_SUM_TOL:
            raise ValueError("component rows must be distributions over the points")
        labels = np.asarray(self.labels)
        if labels.shape[0] != outputs.shape[1]:
            raise ValueError("labels length must match the sample count")
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.components.shape[0]

    @property
    def point_count(self) -> int:
        return self.outputs.shape[0]

    def as_model_world(self) -> "DiscreteWorld":
        return DiscreteWorld(self)


class DiscreteWorld:
    """Duck-typed model world over a DiscreteInstance (for the engine's
    estimators): a sampled model is a point index, its predictions a table row."""

    def __init__(self, instance: DiscreteInstance) -> None:
        self.instance = instance
        self.n = instance.n
        self.labels = instance.labels

    def _draw_point(self, alpha, rng) -> int:
        component = sample_categorical(alpha, rng)
        return sample_categorical(self.instance.components[component], rng)

    def sample_models(self, alpha, mode, rngs, at=None) -> np.ndarray:
        if mode != "joint":
            raise ValueError("discrete instances support joint mode only")
        if at is not None:
            raise ValueError("discrete instances have fixed inputs")
        rows = [self._draw_point(alpha, r) for r in rngs]
        return self.instance.outputs[rows]

    def component_models(self, index, rngs) -> np.ndarray:
        comp = self.instance.components[index]
        rows = [sample_categorical(comp, r) for r in rngs]
        return self.instance.outputs[rows]

    def model_fn(self, alpha, mode, rng) -> ModelFunction:
        if mode != "joint":
            raise ValueError("discrete instances support joint mode only")
        row = self.instance.outputs[self._draw_point(alpha, rng)]
        return ModelFunction(lambda _inputs, _row=row: _row, 0,
                             1 if row.ndim == 1 else row.shape[1])


def _weights_of(alpha) -> np.ndarray:
    if isinstance(alpha, SimplexVector):
        return alpha.weights
    return np.asarray(alpha, dtype=float)


def exact_ensemble(instance: DiscreteInstance, alpha) -> np.ndarray:
    """u-bar(alpha) = sum_j (alpha^T components)_j outputs[j].

    Accepts raw weight vectors as well as simplex points; the expression is
    affine in alpha, so finite differences may step off the simplex.
    """
    weights = _weights_of(alpha)
    if weights.shape != (instance.n,):
        raise ValueError(f"alpha must have length {instance.n}")
    point_weights = weights @ instance.components
    return np.tensordot(point_weights, instance.outputs, axes=1)


def exact_loss(instance: DiscreteInstance, alpha) -> float:
    return float(instance.loss.value(exact_ensemble(instance, alpha), instance.labels))


def exact_gradient(instance: DiscreteInstance, alpha) -> np.ndarray:
    """dl/dalpha_i = <dJ/du(u-bar), sum_j components[i, j] outputs[j]>."""
    ubar = exact_ensemble(instance, alpha)
    grad_outer = np.asarray(instance.loss.functional_gradient(ubar, instance.labels))
    comp_means = np.tensordot(instance.components, instance.outputs, axes=1)
    return comp_means.reshape(instance.n, -1) @ grad_outer.ravel()


class ExactEstimator:
    """Drop-in replacement for the engine's Monte-Carlo estimator: exact
    ensembles and gradients on a discrete instance (rng arguments ignored)."""

    def __init__(self, instance: DiscreteInstance) -> None:
        self.instance = instance
        self.n = instance.n
        self.labels = instance.labels

    def ensemble(self, alpha, rng) -> np.ndarray:
        return exact_ensemble(self.instance, alpha)

    def gradient(self, ubar, alpha, rng) -> np.ndarray:
        return exact_gradient(self.instance, alpha)


@dataclass(frozen=True)
class Prop1Report:
    mixture_min: float
    pointmass_min: float
    argmin_alpha: np.ndarray
    holds: bool


@dataclass(frozen=True)
class LinearCaseReport:
    linear: bool
    pointmass_min: float
    on_support_gap: float
    off_support_gap: float
    route_gap: float
    holds: bool


@dataclass(frozen=True)
class ProbeReport:
    trials: int
    worst_violation: float


@dataclass(frozen=True)
class ConsistencyReport:
    repeats: int
    max_ensemble_z: float
    max_gradient_z: float
    holds: bool


@dataclass(frozen=True)
class CheckResult:
    name: str
    statistic: float
    threshold: float
    passed: bool


def _identity_instance(instance: DiscreteInstance) -> DiscreteInstance:
    # distributions over parameter points themselves: every point mass is a
    # vertex of the simplex, so minima over points and over mixtures compare.
    return replace(instance, components=np.eye(instance.point_count))


def _projected_descent(instance: DiscreteInstance, alpha0: np.ndarray,
                       budget: int) -> tuple[np.ndarray, float]:
    # Projected gradient with a quadratic-upper-bound acceptance test; the
    # step grows on success, so linear objectives run straight to a vertex.
    beta = project_to_simplex(alpha0).weights
    best = exact_loss(instance, beta)
    t = 1.0
    for _ in range(budget):
        g = exact_gradient(instance, beta)
        cand = project_to_simplex(beta - t * g).weights
        dv = cand - beta
        sq = float(dv @ dv)
        if sq < 1e-28:
            break
        value = exact_loss(instance, cand)
        if value <= best + float(g @ dv) + sq / (2.0 * t) + 1e-15:
            beta, best = cand, value
            t *= 2.0
        else:
            t *= 0.5
    return beta, best


def verify_prop1(instance: DiscreteInstance, budget: int = 400) -> Prop1Report:
    """Minimize over mixtures of point masses and over single points.

    The mixture family here is the identity family (one point mass per
    parameter point), so the point minimum is a vertex of the search simplex
    and the mixture minimum can only match or beat it; `budget` caps the
    descent iterations per restart.
    """
    ident = _identity_instance(instance)
    m_pts = instance.point_count
    vertex_values = np.array([exact_loss(ident, np.eye(m_pts)[j]) for j in range(m_pts)])
    pointmass_min = float(vertex_values.min())

    starts = [np.full(m_pts, 1.0 / m_pts), np.eye(m_pts)[int(vertex_values.argmin())]]
    best_alpha, best_value = None, np.inf
    for start in starts:
        alpha, value = _projected_descent(ident, start, budget)
        if value < best_value:
            best_alpha, best_value = alpha, value
    return Prop1Report(best_value, pointmass_min, best_alpha,
                       bool(best_value <= pointmass_min + 1e-6))


def _is_linear(loss, shape, labels, rng) -> tuple[bool, float]:
    u1 = rng.standard_normal(shape)
    u2 = rng.standard_normal(shape)
    g1 = np.asarray(loss.functional_gradient(u1, labels), dtype=float)
    g2 = np.asarray(loss.functional_gradient(u2, labels), dtype=float)
    grad_dev = float(np.max(np.abs(g1 - g2)))
    value_dev = abs(loss.value(u1, labels) - loss.value(u2, labels)
                    - float(np.vdot(g1, u1 - u2)))
    scale = max(1.0, float(np.max(np.abs(g1))))
    dev = max(grad_dev, value_dev) / scale
    return dev <= 1e-9, dev


def verify_linear_case(instance: DiscreteInstance, rng=None,
                       atol: float = 1e-10) -> LinearCaseReport:
    """For a linear loss, mixtures buy nothing: F[mu] equals the point minimum
    exactly when mu is supported on the argmin points, and exceeds it strictly
    otherwise. F is evaluated by two independent routes (exact ensemble-then-
    loss, and the weighted sum of vertex values) and both must agree.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    shape = instance.outputs.shape[1:]
    linear, _ = _is_linear(instance.loss, shape, instance.labels, rng)

    ident = _identity_instance(instance)
    m_pts = instance.point_count
    vertex_values = np.array([exact_loss(ident, np.eye(m_pts)[j]) for j in range(m_pts)])
    low = float(vertex_values.min())
    argmin = vertex_values <= low + atol

    def both_routes(mu: np.ndarray) -> tuple[float, float]:
        return exact_loss(ident, mu), float(mu @ vertex_values)

    mu_on = np.where(argmin, rng.random(m_pts) + 0.5, 0.0)
    mu_on /= mu_on.sum()
    on_a, on_b = both_routes(mu_on)

    route_gap = abs(on_a - on_b)
    if argmin.all():
        off_gap = np.inf
    else:
        mu_off = np.where(argmin, 0.25 / max(argmin.sum(), 1), 0.0)
        spill = np.where(~argmin, rng.random(m_pts) + 0.5, 0.0)
        mu_off = mu_off + (1.0 - mu_off.sum()) * spill / spill.sum()
        off_a, off_b = both_routes(mu_off)
        route_gap = max(route_gap, abs(off_a - off_b))
        off_gap = off_a - low

    holds = linear and abs(on_a - low) <= atol and route_gap <= atol \
        and (np.isinf(off_gap) or off_gap > atol)
    return LinearCaseReport(linear, low, abs(on_a - low), float(off_gap), route_gap, holds)


def convexity_probe(instance: DiscreteInstance, trials: int, rng=None) -> ProbeReport:
    """Midpoint test of l over random simplex pairs; positive worst_violation
    means l((a+b)/2) exceeded the chord average somewhere."""
    rng = np.random.default_rng(0) if rng is None else rng
    worst = -np.inf
    ones = np.ones(instance.n)
    for _ in range(trials):
        a = rng.dirichlet(ones)
        b = rng.dirichlet(ones)
        mid = exact_loss(instance, 0.5 * (a + b))
        chord = 0.5 * (exact_loss(instance, a) + exact_loss(instance, b))
        worst = max(worst, mid - chord)
    return ProbeReport(trials, float(worst))


def product_mean(pair_outputs: np.ndarray, alpha) -> np.ndarray:
    """Two-node product-mode ensemble: nodes drawn independently from the
    mixture over K parameter points, pair_outputs[j, k] the prediction table
    of the model with node parameters (point j, point k)."""
    weights = _weights_of(alpha)
    outputs = np.asarray(pair_outputs, dtype=float)
    if outputs.ndim < 2 or outputs.shape[0] != outputs.shape[1] \
            or weights.shape != (outputs.shape[0],):
        raise ValueError("pair_outputs must be (K, K, ...) with alpha of length K")
    return np.tensordot(weights, np.tensordot(weights, outputs, axes=1), axes=1)


def product_convexity_probe(pair_outputs, labels, loss, trials: int,
                            rng=None) -> ProbeReport:
    """Midpoint test of the two-node product objective. The quadratic
    dependence on alpha makes this non-convex for some tables; a positive
    worst_violation is the counterexample."""
    rng = np.random.default_rng(0) if rng is None else rng
    outputs = np.asarray(pair_outputs, dtype=float)
    ones = np.ones(outputs.shape[0])

    def value(alpha):
        return float(loss.value(product_mean(outputs, alpha), labels))

    worst = -np.inf
    for _ in range(trials):
        a = rng.dirichlet(ones)
        b = rng.dirichlet(ones)
        worst = max(worst, value(0.5 * (a + b)) - 0.5 * (value(a) + value(b)))
    return ProbeReport(trials, float(worst))


def nonconvex_pair_demo():
    """Pair table whose product objective provably bends the wrong way.

    Two points {A, B}; the model predicts 1 when its two nodes disagree and 0
    otherwise, the target is 0, the loss squared error. With a = mass on B
    the ensemble mean is 2a(1-a) and l(a) = (2a(1-a))^2, which lies above the
    chord between a=0 and a=1/2: l(1/4) = 0.140625 > 0.125.
    """
    pair_outputs = np.array([[[0.0], [1.0]], [[1.0], [0.0]]])
    labels = np.zeros(1)
    return pair_outputs, labels


def mc_consistency(instance: DiscreteInstance, repeats: int, R: int = 1, S: int = 1,
                   alpha=None, rng=None, ensemble_fn=None, gradient_fn=None,
                   z_bound: float = 3.0) -> ConsistencyReport:
    """Run the engine's estimators `repeats` times on this instance and place
    their sample means in CLT bands around the exact values.

    Per coordinate: |mean - exact| <= z_bound * sd / sqrt(repeats). A
    coordinate whose repeats are all bitwise identical has no CLT band; it
    must match the exact value to rounding noise instead (the sample std of
    identical floats is not reliably zero, the mean itself rounds). Gradient
    estimates are taken at the exact u-bar, where they are unbiased.
    Estimators can be swapped out (a deliberately biased one should fail).
    """
    from .engine import estimate_ensemble, estimate_gradient

    if repeats < 2:
        raise ValueError("need at least two repeats for a CLT band")
    rng = np.random.default_rng(0) if rng is None else rng
    weights = np.full(instance.n, 1.0 / instance.n) if alpha is None else _weights_of(alpha)
    world = instance.as_model_world()

    if ensemble_fn is None:
        def ensemble_fn(a, r):
            return estimate_ensemble(None, a, R, "joint", 1, r, None, world=world)
    if gradient_fn is None:
        def gradient_fn(u, a, r):
            return estimate_gradient(u, None, S, "joint", 1, r, None, instance.loss,
                                     world=world)

    ubar = exact_ensemble(instance, weights)
    grad = exact_gradient(instance, weights)

    def max_z(estimates: np.ndarray, exact: np.ndarray) -> float:
        mean = estimates.mean(axis=0)
        sd = estimates.std(axis=0, ddof=1)
        diff = np.abs(mean - exact)
        degenerate = np.ptp(estimates, axis=0) == 0.0
        floor = 1e-12 * np.maximum(1.0, np.abs(exact))
        z = np.where(degenerate,
                     np.where(np.abs(estimates[0] - exact) <= floor, 0.0, np.inf),
                     diff / np.where(degenerate, 1.0, np.maximum(sd, 1e-300))
                     * np.sqrt(repeats))
        return float(z.max())

    ens = np.stack([ensemble_fn(weights, r) for r in rng.spawn(repeats)])
    grd = np.stack([gradient_fn(ubar, weights, r) for r in rng.spawn(repeats)])
    ez, gz = max_z(ens, ubar), max_z(grd, grad)
    return ConsistencyReport(repeats, ez, gz, bool(ez <= z_bound and gz <= z_bound))


def random_instance(rng, class_count: int | None = None, n: int | None = None,
                    point_count: int | None = None,
                    sample_count: int | None = None) -> DiscreteInstance:
    """Small random instance; squared-error labels by default, class scores
    and cross-entropy when class_count is given."""
    from .loss import EmpiricalL2, SoftmaxCrossEntropy

    n = int(rng.integers(2, 6)) if n is None else n
    pts = int(rng.integers(2, 8)) if point_count is None else point_count
    m = int(rng.integers(3, 9)) if sample_count is None else sample_count
    components = rng.dirichlet(np.ones(pts), size=n)
    if class_count is None:
        outputs = rng.standard_normal((pts, m))
        return DiscreteInstance(outputs, components, rng.standard_normal(m), EmpiricalL2())
    outputs = rng.standard_normal((pts, m, class_count))
    labels = rng.integers(0, class_count, m)
    return DiscreteInstance(outputs, components, labels, SoftmaxCrossEntropy(class_count))


def make_linear_support_instance(rng, point_count: int = 5, argmin_size: int = 2,
                                 gap: float = 1e-3) -> tuple[DiscreteInstance, np.ndarray]:
    """Linear-loss instance with identity components whose vertex values are
    exactly `low` on a chosen argmin set and at least `gap` above it elsewhere.
    Returns (instance, argmin mask)."""
    if not 1 <= argmin_size <= point_count:
        raise ValueError("argmin_size must lie in [1, point_count]")
    m = int(rng.integers(3, 7))
    weights = rng.standard_normal(m)
    weights /= np.linalg.norm(weights)
    low = float(rng.standard_normal())
    values = np.full(point_count, low)
    values[argmin_size:] = low + gap * (1.0 + rng.random(point_count - argmin_size))
    order = rng.permutation(point_count)
    values = values[order]
    argmin = order < argmin_size  # values[i] == low iff order[i] picked a low slot

    noise = rng.standard_normal((point_count, m))
    noise -= np.outer(noise @ weights, weights)  # keep <weights, row> = value exact
    outputs = values[:, None] * weights[None, :] + noise
    instance = DiscreteInstance(outputs, np.eye(point_count), np.zeros(m),
                                LinearLoss(weights))
    return instance, argmin


def project_by_active_sets(v) -> np.ndarray:
    """Simplex projection by exhaustive KKT support enumeration (oracle for
    the sort-and-threshold routine; O(2^len) so keep len small)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0 or v.size > 20:
        raise ValueError("need a 1-d vector of length 1..20")
    best, best_dist = None, np.inf
    indices = range(v.size)
    for size in range(1, v.size + 1):
        for support in itertools.combinations(indices, size):
            sel = list(support)
            shift = (1.0 - v[sel].sum()) / size
            x = np.zeros_like(v)
            x[sel] = v[sel] + shift
            if x[sel].min() < 0.0:
                continue
            dist = float(np.sum((x - v) ** 2))
            if dist < best_dist:
                best, best_dist = x, dist
    return best


_INSTANCE_FORMAT = "mixtrain instance v1"


def save_instance(instance: DiscreteInstance, path, alpha=None,
                  expect_ensemble=None, expect_gradient=None) -> None:
    """Text fixture; optionally freezes an alpha with its exact ensemble and
    gradient so a later load can be regression-checked."""
    out = instance.outputs
    lines = [f"# {_INSTANCE_FORMAT}"]
    if isinstance(instance.loss, LinearLoss):
        lines.append("loss linear " + " ".join(repr(float(w))
                                               for w in instance.loss.weights.ravel()))
    elif out.ndim == 3:
        lines.append(f"loss xent {out.shape[2]}")
    else:
        lines.append("loss l2")
    lines.append(f"shape {' '.join(str(s) for s in out.shape)}")
    for i, row in enumerate(instance.components):
        lines.append(f"component {i} " + " ".join(repr(float(x)) for x in row))
    for j in range(instance.point_count):
        lines.append(f"outputs {j} " + " ".join(repr(float(x)) for x in out[j].ravel()))
    if out.ndim == 3:
        lines.append("labels " + " ".join(str(int(y)) for y in instance.labels))
    else:
        lines.append("labels " + " ".join(repr(float(y)) for y in instance.labels))
    if alpha is not None:
        lines.append("alpha " + " ".join(repr(float(a)) for a in _weights_of(alpha)))
    if expect_ensemble is not None:
        lines.append("expect_ensemble " + " ".join(repr(float(x))
                                                   for x in np.asarray(expect_ensemble).ravel()))
    if expect_gradient is not None:
        lines.append("expect_gradient " + " ".join(repr(float(x))
                                                   for x in np.asarray(expect_gradient)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> tuple[DiscreteInstance, dict]:
    """Inverse of save_instance; returns (instance, extras) where extras may
    hold 'alpha', 'expect_ensemble', 'expect_gradient'."""
    from .loss import EmpiricalL2, SoftmaxCrossEntropy

    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != f"# {_INSTANCE_FORMAT}":
        raise ValueError(f"{path}: not a '{_INSTANCE_FORMAT}' file")
    loss = None
    shape = None
    comp_rows: dict[int, np.ndarray] = {}
    out_rows: dict[int, np.ndarray] = {}
    labels = None
    extras: dict = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "loss":
            kind, _, tail = rest.partition(" ")
            if kind == "l2":
                loss = EmpiricalL2()
            elif kind == "xent":
                loss = SoftmaxCrossEntropy(int(tail))
            elif kind == "linear":
                loss = LinearLoss(np.array([float(x) for x in tail.split()]))
            else:
                raise ValueError(f"{path}: unknown loss kind {kind!r}")
        elif key == "shape":
            shape = tuple(int(s) for s in rest.split())
        elif key == "component":
            idx, _, row = rest.partition(" ")
            comp_rows[int(idx)] = np.array([float(x) for x in row.split()])
        elif key == "outputs":
            idx, _, row = rest.partition(" ")
            out_rows[int(idx)] = np.array([float(x) for x in row.split()])
        elif key == "labels":
            values = rest.split()
            labels = (np.array([int(v) for v in values])
                      if all("." not in v and "e" not in v for v in values)
                      else np.array([float(v) for v in values]))
        elif key in ("alpha", "expect_ensemble", "expect_gradient"):
            extras[key] = np.array([float(x) for x in rest.split()])
        else:
            raise ValueError(f"{path}: unknown line key {key!r}")
    if loss is None or shape is None or labels is None or not comp_rows or not out_rows:
        raise ValueError(f"{path}: incomplete instance file")
    if sorted(out_rows) != list(range(shape[0])) or any(
            row.size != int(np.prod(shape[1:])) for row in out_rows.values()):
        raise ValueError(f"{path}: outputs lines disagree with the declared shape")
    outputs = np.stack([out_rows[j] for j in range(shape[0])]).reshape(shape)
    components = np.stack([comp_rows[i] for i in sorted(comp_rows)])
    if isinstance(loss, LinearLoss) and loss.weights.size == int(np.prod(shape[1:])):
        loss = LinearLoss(loss.weights.reshape(shape[1:]))
    return DiscreteInstance(outputs, components, labels, loss), extras


def _check_fixture(name: str) -> CheckResult:
    from importlib.resources import as_file, files

    threshold = 1e-12
    try:
        with as_file(files("mixtrain").joinpath("fixtures", name)) as path:
            instance, extras = load_instance(path)
        alpha = extras["alpha"]
        dev = max(float(np.max(np.abs(exact_ensemble(instance, alpha)
                                      - extras["expect_ensemble"].reshape(
                                          instance.outputs.shape[1:])))),
                  float(np.max(np.abs(exact_gradient(instance, alpha)
                                      - extras["expect_gradient"]))))
    except (OSError, KeyError, ValueError):
        return CheckResult("fixture_regression", float("inf"), threshold, False)
    return CheckResult("fixture_regression", dev, threshold, dev <= threshold)


def verification_suite(seed: int = 0, fixture: str = "discrete_instance.txt"
                       ) -> tuple[CheckResult, ...]:
    """One CheckResult per claim; statistics are worst cases over the batch.

    The thresholds match the guarantees stated on each routine: projection
    agreement 1e-8, convexity and linear-support slack 1e-10, mixture-vs-point
    and linear-equality slack 1e-6, finite differences 1e-6 relative, CLT
    bands at three sigma, the product counterexample at least 1e-2.
    """
    from .loss import EmpiricalL2

    root = np.random.default_rng(seed)
    checks: list[CheckResult] = []

    rng = np.random.default_rng(root.integers(2**63))
    worst = 0.0
    for _ in range(300):
        size = int(rng.integers(1, 9))
        v = rng.standard_normal(size) * float(rng.choice([0.1, 1.0, 10.0]))
        worst = max(worst, float(np.max(np.abs(
            project_to_simplex(v).weights - project_by_active_sets(v)))))
    checks.append(CheckResult("projection_oracle", worst, 1e-8, worst <= 1e-8))

    fixed = project_to_simplex(np.array([1.2, 0.3, -0.5])).weights
    dev = float(np.max(np.abs(fixed - np.array([0.95, 0.05, 0.0]))))
    checks.append(CheckResult("projection_example", dev, 1e-12, dev <= 1e-12))

    for label, classes in (("convexity_l2", None), ("convexity_xent", 3)):
        rng = np.random.default_rng(root.integers(2**63))
        worst = -np.inf
        for _ in range(20):
            inst = random_instance(rng, class_count=classes)
            worst = max(worst, convexity_probe(inst, 100, rng).worst_violation)
        checks.append(CheckResult(label, worst, 1e-10, worst <= 1e-10))

    rng = np.random.default_rng(root.integers(2**63))
    worst = -np.inf
    for _ in range(25):
        inst = random_instance(rng, class_count=3 if rng.random() < 0.5 else None)
        rep = verify_prop1(inst)
        worst = max(worst, rep.mixture_min - rep.pointmass_min)
    checks.append(CheckResult("prop1_mixture_bound", worst, 1e-6, worst <= 1e-6))

    rng = np.random.default_rng(root.integers(2**63))
    worst = -np.inf
    for _ in range(25):
        pts, m = int(rng.integers(2, 7)), int(rng.integers(3, 7))
        inst = DiscreteInstance(rng.standard_normal((pts, m)), np.eye(pts),
                                np.zeros(m), LinearLoss(rng.standard_normal(m)))
        rep = verify_prop1(inst)
        worst = max(worst, abs(rep.mixture_min - rep.pointmass_min))
    checks.append(CheckResult("prop1_linear_equality", worst, 1e-6, worst <= 1e-6))

    rng = np.random.default_rng(root.integers(2**63))
    worst_on, worst_off = -np.inf, np.inf
    for _ in range(25):
        inst, _mask = make_linear_support_instance(
            rng, point_count=int(rng.integers(3, 7)), argmin_size=int(rng.integers(1, 3)))
        rep = verify_linear_case(inst, rng)
        worst_on = max(worst_on, rep.on_support_gap, rep.route_gap)
        worst_off = min(worst_off, rep.off_support_gap)
    checks.append(CheckResult("linear_equality_on_support", worst_on, 1e-10,
                              worst_on <= 1e-10))
    checks.append(CheckResult("linear_gap_off_support", worst_off, 1e-6,
                              worst_off >= 1e-6))

    rng = np.random.default_rng(root.integers(2**63))
    worst = 0.0
    h = 1e-5
    for _ in range(30):
        inst = random_instance(rng, class_count=3 if rng.random() < 0.5 else None)
        a = rng.dirichlet(np.ones(inst.n))
        g = exact_gradient(inst, a)
        fd = np.empty_like(g)
        for i in range(inst.n):
            e = np.zeros(inst.n)
            e[i] = h
            fd[i] = (exact_loss(inst, a + e) - exact_loss(inst, a - e)) / (2.0 * h)
        worst = max(worst, float(np.max(np.abs(fd - g)) / max(1.0, np.max(np.abs(g)))))
    checks.append(CheckResult("gradient_fd", worst, 1e-6, worst <= 1e-6))

    rng = np.random.default_rng(root.integers(2**63))
    inst = random_instance(rng, n=3, point_count=4, sample_count=5)
    rep = mc_consistency(inst, repeats=2000, rng=rng)
    z = max(rep.max_ensemble_z, rep.max_gradient_z)
    checks.append(CheckResult("mc_consistency", z, 3.0, rep.holds))

    pair_outputs, pair_labels = nonconvex_pair_demo()
    probe = product_convexity_probe(pair_outputs, pair_labels, EmpiricalL2(), 200,
                                    np.random.default_rng(root.integers(2**63)))
    checks.append(CheckResult("product_nonconvexity", probe.worst_violation, 1e-2,
                              probe.worst_violation >= 1e-2))

    checks.append(_check_fixture(fixture))
    return tuple(checks)
