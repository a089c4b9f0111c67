"""Feed-forward network with analytic gradients over a flat parameter vector.

Parameters are laid out layer by layer: the weight matrix (fan_in x fan_out,
row-major) followed by the bias vector. Everything before the final layer is
the embedding slice, the final layer is the decision slice.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from fedac.errors import NumericError, ShapeError


class Activation(str, Enum):
    """Hidden-layer nonlinearity."""
    RELU = "relu"
    TANH = "tanh"


class MlpSpec(BaseModel):
    """Layer sizes and activation of a multilayer perceptron."""

    model_config = ConfigDict(frozen=True)

    layer_sizes: List[int] = Field(
        description="Input dim, hidden dims..., class count",
        examples=[[16, 32, 16, 4]],
    )

    activation: Activation = Field(
        default=Activation.RELU,
        description="Hidden activation; the head is always softmax-cross-entropy",
    )

    @field_validator("layer_sizes")
    @classmethod
    def validate_layer_sizes(cls, v):
        if len(v) < 3:
            raise ValueError("layer_sizes needs an input, at least one hidden layer and a class count")
        if any(size < 1 for size in v):
            raise ValueError("layer sizes must be positive")
        if v[-1] < 2:
            raise ValueError("at least two classes are required")
        return v

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def class_count(self) -> int:
        return self.layer_sizes[-1]

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def param_count(self) -> int:
        return sum(fan_in * fan_out + fan_out for fan_in, fan_out in self.layer_shapes)

    @property
    def split_index(self) -> int:
        fan_in, fan_out = self.layer_shapes[-1]
        return self.param_count - (fan_in * fan_out + fan_out)


@dataclass(frozen=True)
class ParamVector:
    """Flat model parameters with the embedding/decision boundary."""

    values: np.ndarray
    split_index: int

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not 0 <= self.split_index <= values.size:
            raise ShapeError(f"split_index {self.split_index} outside [0, {values.size}]")
        if not np.all(np.isfinite(values)):
            raise NumericError("parameter vector contains non-finite entries")

    def __len__(self) -> int:
        return self.values.size

    @property
    def embedding(self) -> np.ndarray:
        return self.values[: self.split_index]

    @property
    def decision(self) -> np.ndarray:
        return self.values[self.split_index:]

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values, self.split_index)


@dataclass(frozen=True)
class Batch:
    """A labeled mini-batch."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if labels.size == 0:
            raise ShapeError("batch is empty")
        if features.shape[0] != labels.size:
            raise ShapeError(f"{features.shape[0]} feature rows but {labels.size} labels")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.size


def _check_params(spec: MlpSpec, params: ParamVector) -> None:
    if len(params) != spec.param_count:
        raise ShapeError(f"expected {spec.param_count} parameters, got {len(params)}")


def _check_features(spec: MlpSpec, features: np.ndarray) -> np.ndarray:
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[1] != spec.input_dim:
        raise ShapeError(f"expected feature width {spec.input_dim}, got {features.shape[1]}")
    return features


def unpack(spec: MlpSpec, values: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Views of (W, b) per layer into a flat vector."""
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_shapes:
        weights = values[offset: offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        bias = values[offset: offset + fan_out]
        offset += fan_out
        layers.append((weights, bias))
    return layers


def _activate(spec: MlpSpec, z: np.ndarray) -> np.ndarray:
    if spec.activation == Activation.TANH:
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_grad(spec: MlpSpec, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if spec.activation == Activation.TANH:
        return 1.0 - a * a
    return (z > 0.0).astype(np.float64)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def init_params(spec: MlpSpec, rng: np.random.Generator) -> ParamVector:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    chunks = []
    for fan_in, fan_out in spec.layer_shapes:
        scale = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-scale, scale, size=fan_in * fan_out))
        chunks.append(rng.uniform(-scale, scale, size=fan_out))
    return ParamVector(np.concatenate(chunks), spec.split_index)


def forward(spec: MlpSpec, params: ParamVector, features: np.ndarray) -> np.ndarray:
    """Class-probability matrix, one row per input."""
    _check_params(spec, params)
    a = _check_features(spec, features)
    layers = unpack(spec, params.values)
    for weights, bias in layers[:-1]:
        a = _activate(spec, a @ weights + bias)
    weights, bias = layers[-1]
    return _softmax(a @ weights + bias)


def predict(spec: MlpSpec, params: ParamVector, features: np.ndarray) -> np.ndarray:
    return np.argmax(forward(spec, params, features), axis=1)


def accuracy(spec: MlpSpec, params: ParamVector, batch: Batch) -> float:
    return float(np.mean(predict(spec, params, batch.features) == batch.labels))


def loss_and_grad(spec: MlpSpec, params: ParamVector, batch: Batch) -> Tuple[float, ParamVector]:
    """Mean cross-entropy over the batch and its gradient."""
    _check_params(spec, params)
    features = _check_features(spec, batch.features)
    labels = batch.labels
    if labels.min() < 0 or labels.max() >= spec.class_count:
        raise ShapeError(f"labels must lie in [0, {spec.class_count})")

    layers = unpack(spec, params.values)
    n = labels.size

    # Forward, keeping pre-activations for the backward pass
    activations = [features]
    pre_activations = []
    for index, (weights, bias) in enumerate(layers[:-1]):
        z = activations[-1] @ weights + bias
        a = _activate(spec, z)
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite hidden activation", layer=index)
        pre_activations.append(z)
        activations.append(a)

    weights, bias = layers[-1]
    logits = activations[-1] @ weights + bias
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite logits", layer=len(layers) - 1)

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), labels]))

    probs = np.exp(shifted - log_norm[:, None])
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    # Backward
    grads: List[Optional[np.ndarray]] = [None] * (2 * len(layers))
    for index in range(len(layers) - 1, -1, -1):
        weights, _ = layers[index]
        grads[2 * index] = (activations[index].T @ delta).ravel()
        grads[2 * index + 1] = delta.sum(axis=0)
        if index > 0:
            upstream = delta @ weights.T
            delta = upstream * _activation_grad(spec, pre_activations[index - 1], activations[index])
            if not np.all(np.isfinite(delta)):
                raise NumericError("non-finite gradient", layer=index - 1)

    gradient = np.concatenate(grads)
    if not np.isfinite(loss) or not np.all(np.isfinite(gradient)):
        raise NumericError("non-finite loss or gradient", layer=len(layers) - 1)
    return loss, ParamVector(gradient, params.split_index)


def split_params(params: ParamVector) -> Tuple[np.ndarray, np.ndarray]:
    """(embedding slice, decision slice)."""
    return params.embedding.copy(), params.decision.copy()


def regularized_step(
    params: ParamVector,
    grad: ParamVector,
    center: ParamVector,
    global_embedding: np.ndarray,
    eta: float,
    mu: float,
    lam: float,
) -> ParamVector:
    """One local step: w - eta*grad - eta*mu*(w - center) - eta*lam*(phi - Phi).

    The lam term touches only the embedding slice.
    """
    global_embedding = np.asarray(global_embedding, dtype=np.float64).ravel()
    if len(grad) != len(params) or len(center) != len(params):
        raise ShapeError(
            f"params/grad/center lengths differ: {len(params)}, {len(grad)}, {len(center)}"
        )
    if global_embedding.size != params.split_index:
        raise ShapeError(
            f"global embedding has {global_embedding.size} entries, expected {params.split_index}"
        )
    if eta < 0 or mu < 0 or lam < 0:
        raise ValueError("eta, mu and lam must be non-negative")

    w = params.values
    updated = w - eta * grad.values
    if mu:
        updated = updated - eta * mu * (w - center.values)
    if lam:
        split = params.split_index
        updated[:split] -= eta * lam * (w[:split] - global_embedding)
    return params.with_values(updated)


def local_objective(
    spec: MlpSpec,
    params: ParamVector,
    batch: Batch,
    center: ParamVector,
    global_embedding: np.ndarray,
    mu: float,
    lam: float,
) -> Tuple[float, ParamVector]:
    """Supervised loss plus both proximal terms, with gradient.

    A regularized_step is a plain gradient step on this objective.
    """
    loss, grad = loss_and_grad(spec, params, batch)
    global_embedding = np.asarray(global_embedding, dtype=np.float64).ravel()
    split = params.split_index

    intra = params.values - center.values
    drift = params.embedding - global_embedding
    value = loss + 0.5 * mu * float(intra @ intra) + 0.5 * lam * float(drift @ drift)

    total = grad.values + mu * intra
    total[:split] += lam * drift
    return value, params.with_values(total)


__all__ = [
    "Activation",
    "MlpSpec",
    "ParamVector",
    "Batch",
    "init_params",
    "forward",
    "predict",
    "accuracy",
    "loss_and_grad",
    "split_params",
    "regularized_step",
    "local_objective",
    "unpack",
]
