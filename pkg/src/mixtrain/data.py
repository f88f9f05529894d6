"""Synthetic regression targets, dataset containers, MNIST IDX ingestion."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FourierJumpTarget",
    "RegressionDataset",
    "ClassificationDataset",
    "IdxFormatError",
    "gen_target",
    "sample_regression",
    "load_mnist_idx",
    "write_idx_images",
    "write_idx_labels",
    "subset",
    "dataset_to_csv",
]

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
MNIST_PIXELS = 784
MNIST_CLASSES = 10


class IdxFormatError(ValueError):
    """Raised when an IDX file violates the expected binary layout."""


@dataclass(frozen=True)
class FourierJumpTarget:
    """f(x) = sum_{k<K} (c_k cos 2k pi x + s_k sin 2k pi x)/(1+k) + jump term.

    The jump term is (sign(x - 0.6) - sign(x + 0.4)) * t with sign(0) = 0,
    i.e. a dip of depth 2t on (-0.4, 0.6) with jumps at both endpoints.
    """

    cos_coef: np.ndarray
    sin_coef: np.ndarray
    jump: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "cos_coef", np.asarray(self.cos_coef, dtype=float))
        object.__setattr__(self, "sin_coef", np.asarray(self.sin_coef, dtype=float))
        if self.cos_coef.shape != self.sin_coef.shape or self.cos_coef.ndim != 1:
            raise ValueError("coefficient arrays must be 1-d and of equal length")

    @property
    def terms(self) -> int:
        return self.cos_coef.size

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        k = np.arange(self.terms, dtype=float)
        phases = 2.0 * np.pi * np.multiply.outer(xs, k)
        decays = 1.0 / (1.0 + k)
        smooth = np.cos(phases) @ (decays * self.cos_coef) + np.sin(phases) @ (decays * self.sin_coef)
        return smooth + (np.sign(xs - 0.6) - np.sign(xs + 0.4)) * self.jump


@dataclass(frozen=True)
class RegressionDataset:
    inputs: np.ndarray   # (m,) in [-1, 1]
    labels: np.ndarray   # (m,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=float))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=float))
        if self.inputs.shape != self.labels.shape or self.inputs.ndim != 1:
            raise ValueError("inputs and labels must be 1-d arrays of equal length")
        if self.inputs.size and (self.inputs.min() < -1.0 or self.inputs.max() > 1.0):
            raise ValueError("regression inputs must lie in [-1, 1]")

    @property
    def size(self) -> int:
        return self.inputs.size


@dataclass(frozen=True)
class ClassificationDataset:
    """Rows of pixel/feature values in [0, 1] with integer class labels."""

    inputs: np.ndarray   # (m, d)
    labels: np.ndarray   # (m,) ints in [0, class_count)
    class_count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=float))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))
        if self.inputs.ndim != 2 or self.labels.shape != (self.inputs.shape[0],):
            raise ValueError("inputs must be (m, d) with matching 1-d labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError("labels out of class range")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]


def gen_target(K: int, t: float, seed: int) -> FourierJumpTarget:
    """Fourier-plus-jumps target; coefficients standard normal from the seed."""
    if K < 1:
        raise ValueError("need K >= 1 Fourier terms")
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((2, K))
    return FourierJumpTarget(coef[0], coef[1], float(t))


def sample_regression(target: FourierJumpTarget, m: int, seed: int) -> RegressionDataset:
    """m inputs i.i.d. uniform on [-1, 1] from the seed, labels from the target."""
    if m < 1:
        raise ValueError("need m >= 1 samples")
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(-1.0, 1.0, m)
    return RegressionDataset(inputs, target(inputs))


def _read_header(raw: bytes, words: int, path: str) -> tuple[int, ...]:
    need = 4 * words
    if len(raw) < need:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes, expected >= {need})")
    return struct.unpack(f">{words}I", raw[:need])


def load_mnist_idx(image_path, label_path) -> ClassificationDataset:
    """Parse an uncompressed IDX image/label pair into a dataset.

    Big-endian headers: images magic 2051 then count/rows/cols, labels magic
    2049 then count. Pixels are scaled to [0, 1] by division by 255 and each
    28x28 image is flattened row-major to 784 values.
    """
    with open(image_path, "rb") as fh:
        raw = fh.read()
    magic, count, rows, cols = _read_header(raw, 4, str(image_path))
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"{image_path}: wrong magic {magic}, expected {IMAGE_MAGIC}")
    if rows * cols != MNIST_PIXELS:
        raise IdxFormatError(f"{image_path}: {rows}x{cols} images, expected 28x28")
    payload = raw[16:]
    if len(payload) != count * rows * cols:
        raise IdxFormatError(
            f"{image_path}: truncated payload ({len(payload)} bytes for {count} images)")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, MNIST_PIXELS)

    with open(label_path, "rb") as fh:
        raw = fh.read()
    magic, label_count = _read_header(raw, 2, str(label_path))
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"{label_path}: wrong magic {magic}, expected {LABEL_MAGIC}")
    payload = raw[8:]
    if len(payload) != label_count:
        raise IdxFormatError(
            f"{label_path}: truncated payload ({len(payload)} bytes for {label_count} labels)")
    if label_count != count:
        raise IdxFormatError(
            f"count mismatch: {count} images in {image_path} vs {label_count} labels in {label_path}")
    labels = np.frombuffer(payload, dtype=np.uint8)
    if labels.size and labels.max() >= MNIST_CLASSES:
        raise IdxFormatError(f"{label_path}: label {labels.max()} out of range 0..9")
    return ClassificationDataset(pixels / 255.0, labels.astype(int), MNIST_CLASSES)


def write_idx_images(path, images: np.ndarray) -> None:
    """Write uint8 images of shape (m, 28, 28) or (m, 784) in IDX layout."""
    arr = np.asarray(images, dtype=np.uint8).reshape(-1, 28, 28)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, arr.shape[0], 28, 28))
        fh.write(arr.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    arr = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, arr.shape[0]))
        fh.write(arr.tobytes())


def subset(dataset, count: int, seed: int | None = None):
    """First `count` rows, or a seeded-permutation prefix when seed is given."""
    if count < 0 or count > dataset.size:
        raise ValueError(f"cannot take {count} of {dataset.size} samples")
    if seed is None:
        picked = np.arange(count)
    else:
        picked = np.random.default_rng(seed).permutation(dataset.size)[:count]
    if isinstance(dataset, RegressionDataset):
        return RegressionDataset(dataset.inputs[picked], dataset.labels[picked])
    if isinstance(dataset, ClassificationDataset):
        return ClassificationDataset(dataset.inputs[picked], dataset.labels[picked],
                                     dataset.class_count)
    raise TypeError(f"no subset rule for {type(dataset).__name__}")


def dataset_to_csv(dataset, path) -> None:
    """Dump a dataset to CSV (full-precision reprs) for offline inspection."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(dataset, RegressionDataset):
            writer.writerow(["input", "label"])
            for x, y in zip(dataset.inputs, dataset.labels):
                writer.writerow([repr(float(x)), repr(float(y))])
        elif isinstance(dataset, ClassificationDataset):
            writer.writerow([f"x{i}" for i in range(dataset.input_dim)] + ["label"])
            for row, y in zip(dataset.inputs, dataset.labels):
                writer.writerow([repr(float(v)) for v in row] + [int(y)])
        else:
            raise TypeError(f"no CSV rule for {type(dataset).__name__}")
