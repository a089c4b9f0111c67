"""Cluster Number Tuning: merge or split clusters by their granularity ratio G_c."""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from fedac.clustering.em import Assignment, ClusterSet, e_step, m_step, nearest_center_l2
from fedac.clustering.similarity import ReductionMap, l2_distance_squared
from fedac.errors import ConfigurationError
from fedac.nn.mlp import ParamVector

logger = logging.getLogger(__name__)

DEFAULT_LOWER = 0.2
DEFAULT_UPPER = 0.8


@dataclass(frozen=True)
class GranularityReport:
    """Per-cluster intra/inter distances and their ratio G_c."""

    dist_intra: np.ndarray
    dist_inter: np.ndarray
    g_c: np.ndarray
    a: float = DEFAULT_LOWER
    b: float = DEFAULT_UPPER

    @property
    def inter_defined(self) -> bool:
        return self.g_c.size > 1

    def finite_g_c(self) -> np.ndarray:
        return self.g_c[np.isfinite(self.g_c)]


class CntOutcome(NamedTuple):
    clusters: ClusterSet
    assignment: Assignment
    K: int
    merges: Tuple[Tuple[int, int], ...] = ()
    splits: Tuple[int, ...] = ()


def granularity(client_models: Sequence[ParamVector], assignment: Assignment, clusters: ClusterSet,
                a: float = DEFAULT_LOWER, b: float = DEFAULT_UPPER) -> GranularityReport:
    """dist_intra, dist_inter and G_c for every cluster.

    dist_inter divides the sum over all centers (the self term is zero) by K-1.
    With K = 1 it is undefined: G_c is +inf when the cluster has any spread,
    so CNT can only split.
    """
    K = clusters.K
    intra = np.zeros(K)
    for k in range(K):
        members = assignment.members(k)
        if members.size:
            intra[k] = np.mean([l2_distance_squared(client_models[i], clusters.centers[k]) for i in members])

    if K == 1:
        inter = np.full(1, np.nan)
        g_c = np.array([np.inf if intra[0] > 0 else 0.0])
        return GranularityReport(intra, inter, g_c, a, b)

    center_distances = np.array([
        [l2_distance_squared(clusters.centers[k], clusters.centers[j]) for j in range(K)]
        for k in range(K)
    ])
    inter = center_distances.sum(axis=1) / (K - 1)
    g_c = np.empty(K)
    for k in range(K):
        if inter[k] > 0:
            g_c[k] = intra[k] / inter[k]
        else:
            g_c[k] = np.inf if intra[k] > 0 else 0.0
    return GranularityReport(intra, inter, g_c, a, b)


def _mean_model(client_models: Sequence[ParamVector], members: np.ndarray) -> ParamVector:
    stack = np.stack([client_models[i].values for i in members])
    return client_models[members[0]].with_values(stack.mean(axis=0))


def _farthest_pair(client_models: Sequence[ParamVector], members: np.ndarray) -> Tuple[int, int, float]:
    best = (int(members[0]), int(members[0]), -1.0)
    for x in range(members.size):
        for y in range(x + 1, members.size):
            i, j = int(members[x]), int(members[y])
            distance = l2_distance_squared(client_models[i], client_models[j])
            if distance > best[2]:
                best = (i, j, distance)
    return best


def cnt(
    client_models: Sequence[ParamVector],
    assignment: Assignment,
    clusters: ClusterSet,
    a: float = DEFAULT_LOWER,
    b: float = DEFAULT_UPPER,
    reduction_map: Optional[ReductionMap] = None,
) -> CntOutcome:
    """Merge clusters with G_c < a, split clusters with G_c > b, then re-cluster.

    Decisions come from one snapshot of G_c; merges are applied before splits
    and a cluster that absorbed another is not merged away in the same call.
    Split halves are refined with one E/M iteration over the cluster's members.
    Every E-step uses LrCos when a reduction map is given, squared L2
    otherwise. Clusters left empty are dropped.
    """
    if not 0 < a < b:
        raise ConfigurationError(f"CNT thresholds need 0 < a < b, got a={a}, b={b}")

    report = granularity(client_models, assignment, clusters, a, b)
    m = len(client_models)
    K = clusters.K
    labels = assignment.labels.copy()
    centers: List[ParamVector] = list(clusters.centers)
    alive = [True] * K
    received = set()
    merges: List[Tuple[int, int]] = []
    splits: List[int] = []

    for k in range(K):
        if report.g_c[k] >= a or k in received or sum(alive) <= 1:
            continue
        candidates = [j for j in range(K) if j != k and alive[j]]
        target = min(candidates, key=lambda j: (l2_distance_squared(centers[k], centers[j]), j))
        labels[labels == k] = target
        alive[k] = False
        received.add(target)
        merges.append((k, target))
        members = np.flatnonzero(labels == target)
        if members.size:
            centers[target] = _mean_model(client_models, members)
        logger.info("CNT merged cluster %d into %d (G_c=%.4g)", k, target, report.g_c[k])

    for k in range(K):
        if not alive[k] or not report.g_c[k] > b:
            continue
        if sum(alive) >= m:
            break
        members = np.flatnonzero(labels == k)
        if members.size < 2:
            continue
        first, second, distance = _farthest_pair(client_models, members)
        if distance <= 0:
            continue
        member_models = [client_models[i] for i in members]
        halves = (client_models[first], client_models[second])
        if reduction_map is not None:
            local = e_step(member_models, ClusterSet(halves, np.zeros(2, dtype=np.int64)), reduction_map)
        else:
            local = nearest_center_l2(member_models, halves)
        side_a, side_b = members[local.labels == 0], members[local.labels == 1]
        if side_a.size == 0 or side_b.size == 0:
            continue
        new_index = len(centers)
        labels[side_b] = new_index
        centers[k] = _mean_model(client_models, side_a)
        centers.append(_mean_model(client_models, side_b))
        alive.append(True)
        splits.append(k)
        logger.info("CNT split cluster %d (G_c=%.4g) into %d and %d", k, report.g_c[k], k, new_index)

    if not merges and not splits:
        return CntOutcome(clusters, assignment, K)

    # Compact surviving clusters and run one global E/M pass
    survivors = [k for k, keep in enumerate(alive) if keep]
    remap = {old: new for new, old in enumerate(survivors)}
    compact = Assignment(np.array([remap[int(k)] for k in labels]), len(survivors))
    interim = ClusterSet(tuple(centers[k] for k in survivors), compact.member_counts())

    if reduction_map is not None:
        refreshed = e_step(client_models, interim, reduction_map)
    else:
        refreshed = nearest_center_l2(client_models, interim.centers)
    updated = m_step(client_models, refreshed, interim)

    keep = np.flatnonzero(updated.member_counts > 0)
    if keep.size < updated.K:
        logger.info("CNT dropped %d empty clusters", updated.K - keep.size)
        remap = {old: new for new, old in enumerate(keep)}
        refreshed = Assignment(np.array([remap[int(k)] for k in refreshed.labels]), keep.size)
        updated = ClusterSet(tuple(updated.centers[k] for k in keep), refreshed.member_counts())

    return CntOutcome(updated, refreshed, updated.K, tuple(merges), tuple(splits))
