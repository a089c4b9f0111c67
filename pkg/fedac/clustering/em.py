"""Cluster assignment state and the EM re-clustering steps."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.cluster import kmeans_plusplus

from fedac.clustering.similarity import ReductionMap, l2_distance_squared, similarity_matrix
from fedac.errors import ClusterStateError, ShapeError
from fedac.nn.mlp import ParamVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Assignment:
    """Client-to-cluster map, stored as labels; matrix is the one-hot m x K view."""

    labels: np.ndarray
    K: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.K < 1:
            raise ClusterStateError("K must be at least 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise ClusterStateError(f"cluster labels must lie in [0, {self.K})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_matrix(cls, matrix) -> "Assignment":
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or not np.all((matrix == 0) | (matrix == 1)):
            raise ClusterStateError("assignment matrix must be binary m x K")
        if not np.all(matrix.sum(axis=1) == 1):
            raise ClusterStateError("every assignment row must be one-hot")
        return cls(np.argmax(matrix, axis=1), matrix.shape[1])

    @property
    def client_count(self) -> int:
        return self.labels.size

    @property
    def matrix(self) -> np.ndarray:
        one_hot = np.zeros((self.labels.size, self.K), dtype=np.int64)
        one_hot[np.arange(self.labels.size), self.labels] = 1
        return one_hot

    def member_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.K)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


@dataclass(frozen=True)
class ClusterSet:
    """Cluster centers with member counts; empty clusters are flagged."""

    centers: tuple
    member_counts: np.ndarray

    def __post_init__(self):
        centers = tuple(self.centers)
        counts = np.asarray(self.member_counts, dtype=np.int64).ravel()
        if counts.size != len(centers):
            raise ClusterStateError(f"{len(centers)} centers but {counts.size} member counts")
        counts.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "member_counts", counts)

    @property
    def K(self) -> int:
        return len(self.centers)

    @property
    def empty(self) -> np.ndarray:
        return self.member_counts == 0


def e_step(client_models: Sequence[ParamVector], clusters: ClusterSet,
           reduction_map: ReductionMap) -> Assignment:
    """Assign each client to the center with the highest LrCos (ties -> lowest index)."""
    if clusters.K == 0:
        raise ClusterStateError("cannot assign clients to an empty cluster set")
    similarities = similarity_matrix(client_models, clusters.centers, reduction_map)
    return Assignment(np.argmax(similarities.values, axis=1), clusters.K)


def nearest_center_l2(client_models: Sequence[ParamVector], centers: Sequence[ParamVector]) -> Assignment:
    """Assign each client to the center at the smallest squared L2 distance."""
    if not centers:
        raise ClusterStateError("cannot assign clients to an empty cluster set")
    distances = np.array([
        [l2_distance_squared(model, center) for center in centers] for model in client_models
    ])
    return Assignment(np.argmin(distances, axis=1), len(centers))


def m_step(client_models: Sequence[ParamVector], assignment: Assignment,
           previous: Optional[ClusterSet] = None) -> ClusterSet:
    """Unweighted mean of each cluster's members; empty clusters keep their old center."""
    if assignment.client_count != len(client_models):
        raise ShapeError(
            f"assignment covers {assignment.client_count} clients, got {len(client_models)} models"
        )
    counts = assignment.member_counts()
    centers = []
    for k in range(assignment.K):
        members = assignment.members(k)
        if members.size:
            stack = np.stack([client_models[i].values for i in members])
            centers.append(client_models[members[0]].with_values(stack.mean(axis=0)))
        elif previous is not None and k < previous.K:
            logger.debug("Cluster %d is empty, keeping its previous center", k)
            centers.append(previous.centers[k])
        else:
            raise ClusterStateError(f"cluster {k} has no members and no previous center")
    return ClusterSet(tuple(centers), counts)


def initial_clusters(client_models: Sequence[ParamVector], k_init: int,
                     rng: np.random.Generator) -> ClusterSet:
    """K_init distinct client models as starting centers, drawn by k-means++.

    The first center is uniform; later ones favor models far (squared L2)
    from those already chosen. Coincident models can make k-means++ repeat
    an index, in which case the remainder is filled uniformly.
    """
    m = len(client_models)
    if not 1 <= k_init <= m:
        raise ClusterStateError(f"K_init={k_init} must lie in [1, {m}]")
    stack = np.stack([model.values for model in client_models])
    _, indices = kmeans_plusplus(stack, n_clusters=k_init, random_state=int(rng.integers(2**31 - 1)))
    chosen = list(dict.fromkeys(int(i) for i in indices))
    if len(chosen) < k_init:
        rest = np.setdiff1d(np.arange(m), chosen)
        chosen.extend(int(i) for i in rng.choice(rest, size=k_init - len(chosen), replace=False))
    chosen = np.sort(chosen)
    return ClusterSet(tuple(client_models[i] for i in chosen), np.zeros(k_init, dtype=np.int64))
