"""Pooled dataset + client partitions, built from the data section of a config."""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from fedac.data.dataset import Dataset, concatenate, load_dataset
from fedac.data.partition import (
    ClientPartition,
    GroundTruthGrouping,
    dirichlet_partition,
    pathological_partition,
    split_train_test,
)
from fedac.data.synthetic import synthetic_clustered_task, synthetic_pool
from fedac.errors import ConfigurationError
from fedac.models.config import DataConfig, DataSource, PartitionScheme
from fedac.nn.mlp import Batch


@dataclass(frozen=True)
class FederatedData:
    """Everything the engine needs to know about client data."""

    dataset: Dataset
    partitions: List[ClientPartition]
    grouping: Optional[GroundTruthGrouping] = None

    @property
    def client_count(self) -> int:
        return len(self.partitions)

    @property
    def class_count(self) -> int:
        return self.dataset.class_count

    @property
    def input_dim(self) -> int:
        return self.dataset.input_dim

    def train_batch(self, client_id: int, positions: Optional[np.ndarray] = None) -> Batch:
        indices = self.partitions[client_id].train_indices
        if positions is not None:
            indices = indices[positions]
        return Batch(self.dataset.features[indices], self.dataset.labels[indices])

    def test_batch(self, client_id: int) -> Batch:
        indices = self.partitions[client_id].test_indices
        return Batch(self.dataset.features[indices], self.dataset.labels[indices])

    def histograms(self) -> np.ndarray:
        return np.stack([p.label_histogram for p in self.partitions])


def federate_client_datasets(
    datasets: Sequence[Dataset],
    train_fraction: float = 0.8,
    seed: int = 0,
    grouping: Optional[GroundTruthGrouping] = None,
) -> FederatedData:
    """Pool per-client datasets and split each client's block into train/test."""
    pooled = concatenate(datasets)
    rng = np.random.default_rng(seed)
    partitions = []
    offset = 0
    for client_id, client_data in enumerate(datasets):
        block = np.arange(offset, offset + len(client_data))
        offset += len(client_data)
        partitions.append(
            split_train_test(client_id, block, pooled.labels, pooled.class_count, train_fraction, rng)
        )
    return FederatedData(pooled, partitions, grouping)


def build_federated_data(config: DataConfig, seed: int = 0) -> FederatedData:
    """Materialize the data section of an experiment."""
    data_seed = seed if config.seed is None else config.seed
    partition = config.partition
    size_range = (partition.size_min, partition.size_max)
    synthetic = config.synthetic

    if partition.scheme == PartitionScheme.GROUPS:
        if config.source != DataSource.SYNTHETIC:
            raise ConfigurationError("the 'groups' scheme needs synthetic data")
        datasets, grouping = synthetic_clustered_task(
            synthetic.group_count,
            synthetic.clients_per_group,
            synthetic.input_dim,
            synthetic.class_count,
            synthetic.task_shift,
            synthetic.noise,
            seed=data_seed,
            size_range=size_range,
            client_bias=synthetic.client_bias,
        )
        return federate_client_datasets(datasets, partition.train_fraction, data_seed + 1, grouping)

    if config.source == DataSource.FILE:
        pool = load_dataset(config.path)
    else:
        pool = synthetic_pool(
            synthetic.pool_size, synthetic.input_dim, synthetic.class_count, synthetic.noise, data_seed
        )

    if partition.scheme == PartitionScheme.DIRICHLET:
        partitions = dirichlet_partition(
            pool, partition.clients, partition.alpha, size_range, data_seed + 1, partition.train_fraction
        )
    else:
        partitions = pathological_partition(
            pool, partition.clients, partition.labels_per_client, size_range, data_seed + 1,
            partition.train_fraction,
        )
    return FederatedData(pool, partitions)
