"""Minimal dense neural-network engine.

Fully-connected layers with ReLU on hidden layers, a softmax output, and
mean-reduced categorical cross-entropy. Everything is float64 and every
operation is a pure function of its inputs (plus an explicit seed where
randomness is involved), so values can be shared freely across threads.

The loss is always computed through the fused log-softmax path with
max-subtraction, which keeps it finite for arbitrary finite logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterator

import numpy as np

from .errors import ContractError
from .rng import Xoshiro256PP

if TYPE_CHECKING:  # pragma: no cover - import for annotations only
    from .data import Dataset


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of a dense classifier.

    ``hidden`` lists the hidden-layer widths in order; an empty tuple gives
    plain softmax regression. Activations and loss are fixed: ReLU on
    hidden layers, softmax output, mean-reduced categorical cross-entropy.
    """

    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1:
            raise ContractError("input_dim must be positive")
        if any(h < 1 for h in self.hidden):
            raise ContractError("hidden widths must be positive")
        if self.output_dim < 2:
            raise ContractError("output_dim must be at least 2")

    @property
    def layer_dims(self) -> tuple[tuple[int, int], ...]:
        """(fan_in, fan_out) for every dense layer, input to output."""
        dims = (self.input_dim, *self.hidden, self.output_dim)
        return tuple(zip(dims[:-1], dims[1:]))

    @property
    def parameter_count(self) -> int:
        return sum(fi * fo + fo for fi, fo in self.layer_dims)


@dataclass
class ModelWeights:
    """Per-layer weight matrices ``[fan_in, fan_out]`` and bias vectors ``[fan_out]``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> Iterator[np.ndarray]:
        """All parameter arrays in a fixed order (per layer: weights, then bias)."""
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self) -> "ModelWeights":
        return ModelWeights([w.copy() for w in self.weights], [b.copy() for b in self.biases])


# Gradients share the exact structure of the weights they were taken from.
Gradients = ModelWeights


@dataclass(frozen=True)
class Batch:
    """A mini-batch: float64 features ``[b, input_dim]`` and integer class labels ``[b]``."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.features.ndim != 2:
            raise ContractError("batch features must be 2-D")
        if self.labels.shape != (self.features.shape[0],):
            raise ContractError("labels must be a vector matching the batch size")
        if self.size < 1:
            raise ContractError("a batch must contain at least one sample")

    @property
    def size(self) -> int:
        return self.features.shape[0]


def map_params(fn: Callable[..., np.ndarray], *param_sets: ModelWeights) -> ModelWeights:
    """Apply ``fn`` layer-wise across parameter sets, producing new arrays."""
    weights = [fn(*ws) for ws in zip(*(p.weights for p in param_sets))]
    biases = [fn(*bs) for bs in zip(*(p.biases for p in param_sets))]
    return ModelWeights(weights, biases)


def zeros_like(params: ModelWeights) -> ModelWeights:
    return map_params(np.zeros_like, params)


def max_abs_diff(a: ModelWeights, b: ModelWeights) -> float:
    """Largest element-wise absolute difference across all parameters."""
    _require_same_shape(a, b)
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a.arrays(), b.arrays()))


def _require_same_shape(a: ModelWeights, b: ModelWeights) -> None:
    shapes_a = [x.shape for x in a.arrays()]
    shapes_b = [x.shape for x in b.arrays()]
    if shapes_a != shapes_b:
        raise ContractError(f"parameter shapes differ: {shapes_a} vs {shapes_b}")


def _require_congruent(spec: NetworkSpec, weights: ModelWeights) -> None:
    expected = spec.layer_dims
    if len(weights.weights) != len(expected):
        raise ContractError("layer count does not match the network spec")
    for (fi, fo), w, b in zip(expected, weights.weights, weights.biases):
        if w.shape != (fi, fo) or b.shape != (fo,):
            raise ContractError(
                f"layer shape {w.shape}/{b.shape} does not match spec ({fi}, {fo})"
            )


def _require_batch(spec: NetworkSpec, batch: Batch) -> None:
    if batch.features.shape[1] != spec.input_dim:
        raise ContractError(
            f"batch feature dim {batch.features.shape[1]} != input_dim {spec.input_dim}"
        )
    if batch.labels.min() < 0 or batch.labels.max() >= spec.output_dim:
        raise ContractError("batch labels out of range for the network output")


def init_weights(spec: NetworkSpec, seed: int) -> ModelWeights:
    """Glorot-uniform weights, zero biases, drawn from one seeded stream.

    Draw order is fixed (layers in order, entries row-major), so the same
    (spec, seed) pair yields bit-identical weights everywhere.
    """
    rng = Xoshiro256PP(seed)
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for fan_in, fan_out in spec.layer_dims:
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform_array(fan_in * fan_out, -bound, bound).reshape(fan_in, fan_out)
        weights.append(w)
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return ModelWeights(weights, biases)


def _forward_full(
    spec: NetworkSpec, weights: ModelWeights, batch: Batch
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray, float]:
    """Shared forward pass: (pre-activations, activations, log-probs, loss).

    ``forward`` and ``compute_gradients`` both report this exact loss value,
    bit for bit, because they share this code path.
    """
    _require_congruent(spec, weights)
    _require_batch(spec, batch)
    num_layers = len(weights.weights)
    activations = [batch.features]
    pre_acts: list[np.ndarray] = []
    a = batch.features
    for l, (w, b) in enumerate(zip(weights.weights, weights.biases)):
        z = a @ w + b
        pre_acts.append(z)
        if l < num_layers - 1:
            a = np.maximum(z, 0.0)
            activations.append(a)
    logits = pre_acts[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    picked = log_probs[np.arange(batch.size), batch.labels]
    loss = float(-np.mean(picked))
    return pre_acts, activations, log_probs, loss


def forward(spec: NetworkSpec, weights: ModelWeights, batch: Batch) -> tuple[np.ndarray, float]:
    """Class probabilities ``[b, output_dim]`` and the mean cross-entropy loss."""
    _, _, log_probs, loss = _forward_full(spec, weights, batch)
    return np.exp(log_probs), loss


def compute_gradients(
    spec: NetworkSpec, weights: ModelWeights, batch: Batch
) -> tuple[float, Gradients]:
    """Analytic backpropagation of the mean-reduced cross-entropy."""
    pre_acts, activations, log_probs, loss = _forward_full(spec, weights, batch)
    probs = np.exp(log_probs)
    b = batch.size
    delta = probs
    delta[np.arange(b), batch.labels] -= 1.0
    delta /= b
    grad_w: list[np.ndarray] = [None] * len(weights.weights)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(weights.biases)  # type: ignore[list-item]
    for l in range(len(weights.weights) - 1, -1, -1):
        grad_w[l] = activations[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ weights.weights[l].T) * (pre_acts[l - 1] > 0.0)
    return loss, ModelWeights(grad_w, grad_b)


def sgd_step(weights: ModelWeights, grads: Gradients, eta: float) -> ModelWeights:
    """One gradient-descent update: ``weights - eta * grads``, as new arrays."""
    if eta < 0:
        raise ContractError("learning rate must be non-negative")
    _require_same_shape(weights, grads)
    return map_params(lambda w, g: w - eta * g, weights, grads)


def finite_diff_grad(
    spec: NetworkSpec, weights: ModelWeights, batch: Batch, eps_fd: float
) -> Gradients:
    """Central-difference gradient oracle: ``(F(w+eps) - F(w-eps)) / (2 eps)``.

    Exhaustive over every parameter; intended for testing small networks,
    independently of the backpropagation path.
    """
    if eps_fd <= 0:
        raise ContractError("eps_fd must be positive")
    work = weights.copy()
    out = zeros_like(weights)
    work_arrays = list(work.arrays())
    out_arrays = list(out.arrays())
    for arr, dst in zip(work_arrays, out_arrays):
        flat = arr.reshape(-1)
        dflat = dst.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps_fd
            _, _, _, loss_plus = _forward_full(spec, work, batch)
            flat[i] = orig - eps_fd
            _, _, _, loss_minus = _forward_full(spec, work, batch)
            flat[i] = orig
            dflat[i] = (loss_plus - loss_minus) / (2.0 * eps_fd)
    return out


def evaluate(spec: NetworkSpec, weights: ModelWeights, dataset: "Dataset") -> tuple[float, float]:
    """Mean cross-entropy and accuracy over a whole dataset.

    Predictions take the argmax of the class probabilities; ties resolve to
    the lowest class index. Raises if the result is non-finite (the weights
    have diverged) so broken runs fail loudly instead of logging garbage.
    """
    if dataset.features.shape[0] < 1:
        raise ContractError("cannot evaluate on an empty dataset")
    for arr in weights.arrays():
        if not np.isfinite(arr).all():
            raise ContractError("weights are non-finite; training diverged")
    batch = Batch(dataset.features, dataset.labels)
    probs, loss = forward(spec, weights, batch)
    if not math.isfinite(loss):
        raise ContractError("evaluation produced a non-finite loss; weights have diverged")
    predictions = np.argmax(probs, axis=1)
    accuracy = float(np.mean(predictions == batch.labels))
    return loss, accuracy
