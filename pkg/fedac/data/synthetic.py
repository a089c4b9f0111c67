"""Synthetic classification tasks with known latent client groups."""

import logging
from typing import List, Tuple

import numpy as np
from scipy.linalg import expm

from fedac.data.dataset import Dataset
from fedac.data.partition import DEFAULT_SIZE_RANGE, GroundTruthGrouping
from fedac.errors import ConfigurationError

logger = logging.getLogger(__name__)


def _base_labeler(rng: np.random.Generator, d: int, class_count: int) -> np.ndarray:
    weights = rng.normal(size=(d, class_count))
    # Rows centered across classes keep the classes roughly balanced
    return weights - weights.mean(axis=1, keepdims=True)


def _rotation(rng: np.random.Generator, d: int, magnitude: float) -> np.ndarray:
    generator = rng.normal(size=(d, d))
    skew = (generator - generator.T) / 2.0
    skew /= max(np.linalg.norm(skew, 2), 1e-12)
    return expm(magnitude * skew)


def _label_permutation(rng: np.random.Generator, group: int, class_count: int) -> np.ndarray:
    if group < class_count:
        return np.roll(np.arange(class_count), group)
    return rng.permutation(class_count)


def _label(features: np.ndarray, rotation: np.ndarray, labeler: np.ndarray, bias: np.ndarray,
           permutation: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    logits = features @ rotation @ labeler + bias
    if noise > 0:
        logits = logits + rng.normal(scale=noise, size=logits.shape)
    return permutation[np.argmax(logits, axis=1)]


def synthetic_clustered_task(
    group_count: int,
    clients_per_group: int,
    d: int,
    class_count: int,
    task_shift: float,
    noise: float,
    seed: int = 0,
    size_range: Tuple[int, int] = DEFAULT_SIZE_RANGE,
    client_bias: float = 0.0,
) -> Tuple[List[Dataset], GroundTruthGrouping]:
    """Per-client datasets drawn from one of group_count related labelers.

    Group g's labeler is a rotation of a shared linear softmax labeler followed
    by a cyclic label permutation; group 0 keeps the base labeler. With
    task_shift=0 all groups share one labeler. client_bias adds a per-client
    logit offset so clients in one group are similar but not identical.
    """
    if group_count < 1 or clients_per_group < 1:
        raise ConfigurationError("group_count and clients_per_group must be at least 1")
    if d < 1 or class_count < 2:
        raise ConfigurationError("need d >= 1 and at least two classes")
    if task_shift < 0 or noise < 0 or client_bias < 0:
        raise ConfigurationError("task_shift, noise and client_bias must be non-negative")
    low, high = int(size_range[0]), int(size_range[1])
    if low < 2 or low > high:
        raise ConfigurationError(f"infeasible size range {size_range}")

    rng = np.random.default_rng(seed)
    labeler = _base_labeler(rng, d, class_count)

    rotations = []
    permutations = []
    for group in range(group_count):
        if task_shift == 0 or group == 0:
            rotations.append(np.eye(d))
            permutations.append(np.arange(class_count))
        else:
            rotations.append(_rotation(rng, d, task_shift))
            permutations.append(_label_permutation(rng, group, class_count))

    datasets = []
    groups = []
    for group in range(group_count):
        for _ in range(clients_per_group):
            size = int(rng.integers(low, high + 1))
            features = rng.normal(size=(size, d))
            bias = rng.normal(scale=client_bias, size=class_count) if client_bias else np.zeros(class_count)
            labels = _label(features, rotations[group], labeler, bias, permutations[group], noise, rng)
            datasets.append(Dataset(features, labels, class_count))
            groups.append(group)

    logger.info(
        "Synthetic task: %d groups x %d clients, d=%d, C=%d, shift=%g",
        group_count, clients_per_group, d, class_count, task_shift,
    )
    return datasets, GroundTruthGrouping(np.asarray(groups), group_count)


def synthetic_pool(n: int, d: int, class_count: int, noise: float = 0.1, seed: int = 0) -> Dataset:
    """A pool labeled by one linear softmax labeler, for Dirichlet or pathological partitioning."""
    if n < 1 or d < 1 or class_count < 2:
        raise ConfigurationError("need n >= 1, d >= 1 and at least two classes")
    rng = np.random.default_rng(seed)
    labeler = _base_labeler(rng, d, class_count)
    features = rng.normal(size=(n, d))
    labels = _label(features, np.eye(d), labeler, np.zeros(class_count),
                    np.arange(class_count), noise, rng)
    return Dataset(features, labels, class_count)
