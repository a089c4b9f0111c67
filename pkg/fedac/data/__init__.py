"""Datasets, non-IID partitioners, synthetic tasks and label divergence."""

from .dataset import Dataset, concatenate, load_dataset, save_dataset
from .divergence import label_kl, pairwise_label_kl
from .partition import (
    ClientPartition,
    GroundTruthGrouping,
    dirichlet_partition,
    pathological_partition,
    partition_report,
)
from .synthetic import synthetic_clustered_task, synthetic_pool
from .federated import FederatedData, build_federated_data, federate_client_datasets
