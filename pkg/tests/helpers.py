"""Shared test utilities: scalar-loop oracles, IDX fixtures, image blobs.

The oracles here recompute results with plain Python loops and math calls,
independently of the vectorized implementation paths they check.
"""

from __future__ import annotations

import math
import os
import struct

import numpy as np

from fedsim import Batch, Dataset, ModelWeights, NetworkSpec
from fedsim.rng import Xoshiro256PP, derive_seed


def scalar_loss(spec: NetworkSpec, weights: ModelWeights, batch: Batch) -> float:
    """Per-sample forward pass and cross-entropy, all in Python floats."""
    total = 0.0
    num_layers = len(weights.weights)
    for s in range(batch.size):
        x = [float(v) for v in batch.features[s]]
        z: list[float] = []
        for l in range(num_layers):
            w = weights.weights[l]
            b = weights.biases[l]
            z = [
                sum(x[i] * float(w[i, o]) for i in range(w.shape[0])) + float(b[o])
                for o in range(w.shape[1])
            ]
            if l < num_layers - 1:
                x = [max(0.0, v) for v in z]
        m = max(z)
        log_norm = m + math.log(sum(math.exp(v - m) for v in z))
        total += -(z[batch.labels[s]] - log_norm)
    return total / batch.size


def scalar_probabilities(spec: NetworkSpec, weights: ModelWeights, features_row) -> list[float]:
    x = [float(v) for v in features_row]
    num_layers = len(weights.weights)
    z: list[float] = []
    for l in range(num_layers):
        w = weights.weights[l]
        b = weights.biases[l]
        z = [
            sum(x[i] * float(w[i, o]) for i in range(w.shape[0])) + float(b[o])
            for o in range(w.shape[1])
        ]
        if l < num_layers - 1:
            x = [max(0.0, v) for v in z]
    m = max(z)
    exps = [math.exp(v - m) for v in z]
    norm = sum(exps)
    return [e / norm for e in exps]


def scalar_evaluate(spec: NetworkSpec, weights: ModelWeights, dataset: Dataset) -> tuple[float, float]:
    """Loss and accuracy recomputed sample by sample (lowest-index tie-break)."""
    total_loss = 0.0
    hits = 0
    for s in range(dataset.n):
        probs = scalar_probabilities(spec, weights, dataset.features[s])
        label = int(dataset.labels[s])
        total_loss += -math.log(probs[label]) if probs[label] > 0 else float("inf")
        best = 0
        for c in range(1, len(probs)):
            if probs[c] > probs[best]:
                best = c
        hits += best == label
    return total_loss / dataset.n, hits / dataset.n


def grad_rel_error(analytic: ModelWeights, reference: ModelWeights) -> float:
    """Max absolute gradient gap, relative to the reference's largest entry."""
    scale = max(float(np.max(np.abs(a))) for a in reference.arrays())
    gap = max(
        float(np.max(np.abs(a - b)))
        for a, b in zip(analytic.arrays(), reference.arrays())
    )
    return gap / max(scale, 1e-12)


def write_idx_pair(directory: str, images: np.ndarray, labels: np.ndarray, stem: str) -> tuple[str, str]:
    """Write a uint8 image array [n, rows, cols] and labels [n] as IDX files."""
    n, rows, cols = images.shape
    images_path = os.path.join(directory, f"{stem}-images-idx3-ubyte")
    labels_path = os.path.join(directory, f"{stem}-labels-idx1-ubyte")
    with open(images_path, "wb") as f:
        f.write(struct.pack(">iiii", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">ii", 0x00000801, n))
        f.write(labels.astype(np.uint8).tobytes())
    return images_path, labels_path


def make_image_blobs(
    seed: int, n: int, side: int = 28, num_classes: int = 10
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic uint8 image-classification data, one blob per class.

    Class c is a fixed random template; samples add pixel noise and clip to
    [0, 255]. Labels are round-robin, so any prefix whose length is a
    multiple of ``num_classes`` is exactly balanced.
    """
    dim = side * side
    rng = Xoshiro256PP(derive_seed(seed, 0x1D8))
    templates = np.stack(
        [rng.uniform_array(dim, 40.0, 215.0) for _ in range(num_classes)]
    )
    labels = np.arange(n, dtype=np.int64) % num_classes
    noise = rng.normal_array(n * dim).reshape(n, dim) * 60.0
    pixels = np.clip(templates[labels] + noise, 0.0, 255.0)
    images = np.rint(pixels).astype(np.uint8).reshape(n, side, side)
    return images, labels.astype(np.uint8)


def mnist_idx_paths() -> dict[str, str] | None:
    """Locate real MNIST IDX files if present, via FEDSIM_MNIST_DIR or ./data/mnist."""
    candidates = []
    env_dir = os.environ.get("FEDSIM_MNIST_DIR")
    if env_dir:
        candidates.append(env_dir)
    candidates.append(os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    names = {
        "train_images": "train-images-idx3-ubyte",
        "train_labels": "train-labels-idx1-ubyte",
        "test_images": "t10k-images-idx3-ubyte",
        "test_labels": "t10k-labels-idx1-ubyte",
    }
    for directory in candidates:
        paths = {k: os.path.join(directory, v) for k, v in names.items()}
        if all(os.path.exists(p) for p in paths.values()):
            return paths
    return None


def balanced_subset(dataset: Dataset, per_class: int, seed: int) -> Dataset:
    """Deterministically pick ``per_class`` samples of every class."""
    rng = Xoshiro256PP(derive_seed(seed, 0xBA1))
    chosen = []
    for label in range(dataset.num_classes):
        pool = np.flatnonzero(dataset.labels == label)
        if pool.size < per_class:
            raise ValueError(f"class {label} has only {pool.size} samples")
        order = rng.permutation(pool.size)
        chosen.append(pool[order[:per_class]])
    idx = np.concatenate(chosen)
    # Interleave classes so any prefix stays roughly balanced.
    idx = idx.reshape(dataset.num_classes, per_class).T.reshape(-1)
    return dataset.subset(idx)
