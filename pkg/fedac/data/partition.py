"""Non-IID client partitioning: Dirichlet label skew and pathological label sets."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fedac.data.dataset import Dataset
from fedac.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_SIZE_RANGE = (50, 350)
DEFAULT_TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class ClientPartition:
    """One client's train/test index sets into a pooled Dataset."""

    client_id: int
    train_indices: np.ndarray
    test_indices: np.ndarray
    label_histogram: np.ndarray

    def __post_init__(self):
        for name in ("train_indices", "test_indices", "label_histogram"):
            array = np.asarray(getattr(self, name), dtype=np.int64).ravel()
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if np.intersect1d(self.train_indices, self.test_indices).size:
            raise ConfigurationError(f"client {self.client_id}: train and test indices overlap")
        if int(self.label_histogram.sum()) != self.train_indices.size:
            raise ConfigurationError(f"client {self.client_id}: histogram does not match train size")

    @property
    def train_size(self) -> int:
        return self.train_indices.size

    @property
    def test_size(self) -> int:
        return self.test_indices.size

    @property
    def label_distribution(self) -> np.ndarray:
        total = self.label_histogram.sum()
        if total == 0:
            return np.zeros(self.label_histogram.size)
        return self.label_histogram / total


@dataclass(frozen=True)
class GroundTruthGrouping:
    """Latent group of every client, when the generator knows it."""

    group_of_client: np.ndarray
    group_count: int

    def __post_init__(self):
        groups = np.asarray(self.group_of_client, dtype=np.int64).ravel()
        groups.setflags(write=False)
        object.__setattr__(self, "group_of_client", groups)
        counts = np.bincount(groups, minlength=self.group_count)
        if counts.size != self.group_count or np.any(counts == 0):
            raise ConfigurationError("every ground-truth group must have at least one client")


def _validate_size_range(size_range: Tuple[int, int], dataset_size: int) -> Tuple[int, int]:
    low, high = int(size_range[0]), int(size_range[1])
    if low < 2 or low > high:
        raise ConfigurationError(f"infeasible size range {size_range}: need 2 <= min <= max")
    if high > dataset_size:
        raise ConfigurationError(
            f"infeasible size range {size_range}: dataset holds only {dataset_size} samples"
        )
    return low, high


class _ClassPools:
    """Per-class sample queues consumed without replacement across clients.

    When a class queue runs dry it is reshuffled and reused, which is the
    with-replacement fallback.
    """

    def __init__(self, dataset: Dataset, rng: np.random.Generator):
        self.rng = rng
        self.pools = [rng.permutation(indices) for indices in dataset.class_indices()]
        self.cursors = [0] * len(self.pools)

    def available(self) -> np.ndarray:
        return np.array([pool.size > 0 for pool in self.pools])

    def draw(self, class_id: int, count: int) -> np.ndarray:
        pool = self.pools[class_id]
        taken: List[np.ndarray] = []
        remaining = count
        while remaining > 0:
            if self.cursors[class_id] >= pool.size:
                logger.debug("class %d pool exhausted, reusing samples", class_id)
                pool = self.pools[class_id] = self.rng.permutation(pool)
                self.cursors[class_id] = 0
            start = self.cursors[class_id]
            chunk = pool[start: start + remaining]
            self.cursors[class_id] += chunk.size
            taken.append(chunk)
            remaining -= chunk.size
        return np.concatenate(taken) if taken else np.empty(0, dtype=np.int64)


def split_train_test(
    client_id: int,
    drawn: np.ndarray,
    labels: np.ndarray,
    class_count: int,
    train_fraction: float,
    rng: np.random.Generator,
) -> ClientPartition:
    """Split a client's drawn indices so repeated indices stay on one side."""
    values, counts = np.unique(drawn, return_counts=True)
    order = rng.permutation(values.size)
    target_test = int(round((1.0 - train_fraction) * drawn.size))
    if values.size > 1:
        target_test = max(target_test, 1)

    test_values: List[int] = []
    test_count = 0
    for position in order:
        if test_count >= target_test or len(test_values) >= values.size - 1:
            break
        test_values.append(values[position])
        test_count += counts[position]

    in_test = np.isin(drawn, test_values)
    train = rng.permutation(drawn[~in_test])
    test = rng.permutation(np.unique(drawn[in_test]))
    histogram = np.bincount(labels[train], minlength=class_count)
    return ClientPartition(client_id, train, test, histogram)


def _partition_from_counts(
    dataset: Dataset,
    class_counts: Sequence[np.ndarray],
    train_fraction: float,
    rng: np.random.Generator,
) -> List[ClientPartition]:
    pools = _ClassPools(dataset, rng)
    partitions = []
    for client_id, counts in enumerate(class_counts):
        drawn = np.concatenate(
            [pools.draw(c, int(k)) for c, k in enumerate(counts) if k > 0]
        )
        partitions.append(
            split_train_test(client_id, drawn, dataset.labels, dataset.class_count, train_fraction, rng)
        )
    return partitions


def dirichlet_partition(
    dataset: Dataset,
    m: int,
    alpha: float,
    size_range: Tuple[int, int] = DEFAULT_SIZE_RANGE,
    seed: int = 0,
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
) -> List[ClientPartition]:
    """Label-skewed partition with client class proportions ~ Dirichlet(alpha)."""
    if alpha <= 0:
        raise ConfigurationError("alpha must be positive")
    if m < 1:
        raise ConfigurationError("at least one client is required")
    low, high = _validate_size_range(size_range, len(dataset))

    rng = np.random.default_rng(seed)
    pools_present = np.array([indices.size > 0 for indices in dataset.class_indices()])

    class_counts = []
    for _ in range(m):
        size = int(rng.integers(low, high + 1))
        proportions = rng.dirichlet(np.full(dataset.class_count, alpha))
        proportions = np.where(pools_present, proportions, 0.0)
        if not np.isfinite(proportions).all() or proportions.sum() <= 0:
            # Extreme alpha can underflow every component
            proportions = np.zeros(dataset.class_count)
            proportions[rng.choice(np.flatnonzero(pools_present))] = 1.0
        proportions = proportions / proportions.sum()
        class_counts.append(rng.multinomial(size, proportions))

    partitions = _partition_from_counts(dataset, class_counts, train_fraction, rng)
    logger.info("Dirichlet partition: %d clients, alpha=%g", m, alpha)
    return partitions


def assign_label_sets(m: int, n: int, class_count: int, rng: np.random.Generator) -> List[np.ndarray]:
    """Pick n distinct classes per client, covering every class when m*n >= C."""
    uncovered = list(rng.permutation(class_count))
    label_sets = []
    for _ in range(m):
        chosen = [uncovered.pop() for _ in range(min(n, len(uncovered)))]
        if len(chosen) < n:
            rest = np.setdiff1d(np.arange(class_count), chosen)
            chosen.extend(rng.choice(rest, size=n - len(chosen), replace=False))
        label_sets.append(np.sort(np.asarray(chosen, dtype=np.int64)))
    return label_sets


def pathological_partition(
    dataset: Dataset,
    m: int,
    n: int,
    size_range: Tuple[int, int] = DEFAULT_SIZE_RANGE,
    seed: int = 0,
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
) -> List[ClientPartition]:
    """Each client draws samples from n distinct classes only."""
    if not 1 <= n <= dataset.class_count:
        raise ConfigurationError(f"labels per client must lie in [1, {dataset.class_count}], got {n}")
    if m < 1:
        raise ConfigurationError("at least one client is required")
    low, high = _validate_size_range(size_range, len(dataset))

    rng = np.random.default_rng(seed)
    label_sets = assign_label_sets(m, n, dataset.class_count, rng)
    pools_present = np.array([indices.size > 0 for indices in dataset.class_indices()])

    class_counts = []
    for label_set in label_sets:
        size = int(rng.integers(low, high + 1))
        usable = label_set[pools_present[label_set]]
        if usable.size == 0:
            raise ConfigurationError(f"classes {label_set.tolist()} have no samples in the dataset")
        counts = np.zeros(dataset.class_count, dtype=np.int64)
        counts[usable] = rng.multinomial(size, np.full(usable.size, 1.0 / usable.size))
        class_counts.append(counts)

    partitions = _partition_from_counts(dataset, class_counts, train_fraction, rng)
    logger.info("Pathological partition: %d clients, %d labels each", m, n)
    return partitions


def partition_report(partitions: Sequence[ClientPartition], class_count: Optional[int] = None) -> pd.DataFrame:
    """client_id, train_size, test_size, then one histogram column per class."""
    if class_count is None:
        class_count = partitions[0].label_histogram.size if partitions else 0
    rows = []
    for partition in partitions:
        row = {
            "client_id": partition.client_id,
            "train_size": partition.train_size,
            "test_size": partition.test_size,
        }
        row.update({f"class_{c}": int(partition.label_histogram[c]) for c in range(class_count)})
        rows.append(row)
    columns = ["client_id", "train_size", "test_size"] + [f"class_{c}" for c in range(class_count)]
    return pd.DataFrame(rows, columns=columns)
