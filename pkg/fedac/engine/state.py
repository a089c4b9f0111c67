from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional

import numpy as np

from fedac.clustering.em import Assignment, ClusterSet
from fedac.clustering.similarity import ReductionMap
from fedac.data.partition import ClientPartition
from fedac.nn.mlp import Batch, ParamVector


class Stream(IntEnum):
    """Independent random streams derived from the run seed."""
    INIT = 0
    WARMUP = 1
    SAMPLE = 2
    LOCAL = 3


def stream_rng(seed: int, stream: Stream, *keys: int) -> np.random.Generator:
    """Generator for (seed, stream, keys...), e.g. (seed, LOCAL, round, client).

    Streams depend only on their keys, so results do not depend on the order
    in which concurrent client updates finish.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), *map(int, keys)]))


@dataclass(frozen=True)
class ClientState:
    """A client's personalized model and its local data."""

    client_id: int
    params: ParamVector
    partition: ClientPartition
    train: Optional[Batch] = None
    test: Optional[Batch] = None

    def with_params(self, params: ParamVector) -> "ClientState":
        return replace(self, params=params)


@dataclass(frozen=True)
class ServerState:
    """Everything the server carries between rounds."""

    round: int
    global_embedding: np.ndarray
    clusters: ClusterSet
    assignment: Assignment
    reduction_map: Optional[ReductionMap]
    seed: int

    def __post_init__(self):
        embedding = np.asarray(self.global_embedding, dtype=np.float64).ravel()
        embedding.setflags(write=False)
        object.__setattr__(self, "global_embedding", embedding)
        if self.reduction_map is not None and self.reduction_map.created_round > self.round:
            raise ValueError("reduction map cannot come from a future round")

    @property
    def K(self) -> int:
        return self.clusters.K

    def center_of(self, client_id: int) -> ParamVector:
        return self.clusters.centers[int(self.assignment.labels[client_id])]
