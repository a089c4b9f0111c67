import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fedac.clustering.cnt import granularity
from fedac.clustering.metrics import adjusted_rand_index
from fedac.data.partition import GroundTruthGrouping
from fedac.engine.state import ClientState, ServerState
from fedac.models.config import RunConfig
from fedac.models.records import ClusterTraceRow, MetricsRecord
from fedac.nn.mlp import MlpSpec, ParamVector, accuracy, loss_and_grad

logger = logging.getLogger(__name__)


def evaluated_model(client: ClientState, state: ServerState, config: RunConfig) -> ParamVector:
    """The personalized model, or the cluster center for shared-model modes."""
    if config.evaluates_center:
        return state.center_of(client.client_id)
    return client.params


def client_accuracies(clients: Sequence[ClientState], state: ServerState, config: RunConfig,
                      spec: MlpSpec) -> Tuple[List[float], List[float]]:
    """Per-client (test accuracy, train loss); clients without test data are skipped."""
    accuracies, losses = [], []
    for client in clients:
        model = evaluated_model(client, state, config)
        if client.test is None or len(client.test) == 0:
            logger.warning("Client %d has no test data, excluded from evaluation", client.client_id)
            continue
        accuracies.append(accuracy(spec, model, client.test))
        if client.train is not None and len(client.train):
            losses.append(loss_and_grad(spec, model, client.train)[0])
    return accuracies, losses


def evaluate(
    clients: Sequence[ClientState],
    state: ServerState,
    config: RunConfig,
    spec: MlpSpec,
    grouping: Optional[GroundTruthGrouping] = None,
    round_index: Optional[int] = None,
) -> MetricsRecord:
    """Mean/std top-1 test accuracy, mean train loss, K, G_c statistics and ARI."""
    accuracies, losses = client_accuracies(clients, state, config, spec)
    mean_acc = float(np.mean(accuracies)) if accuracies else 0.0
    std_acc = float(np.std(accuracies)) if accuracies else 0.0
    mean_loss = float(np.mean(losses)) if losses else 0.0

    g_c_mean = g_c_std = float("nan")
    if config.clustering_enabled:
        report = granularity([c.params for c in clients], state.assignment, state.clusters,
                             config.a, config.b)
        finite = report.finite_g_c()
        if report.inter_defined and finite.size:
            g_c_mean, g_c_std = float(np.mean(finite)), float(np.std(finite))

    ari = adjusted_rand_index(state.assignment, grouping) if grouping is not None else None
    return MetricsRecord(
        round=state.round if round_index is None else round_index,
        mean_test_accuracy=mean_acc,
        std_test_accuracy=std_acc,
        mean_train_loss=mean_loss,
        K=state.K,
        g_c_mean=g_c_mean,
        g_c_std=g_c_std,
        ari=ari,
    )


def cluster_trace(clients: Sequence[ClientState], state: ServerState, config: RunConfig,
                  round_index: int) -> List[ClusterTraceRow]:
    """One granularity row per cluster."""
    report = granularity([c.params for c in clients], state.assignment, state.clusters,
                         config.a, config.b)
    counts = state.assignment.member_counts()
    return [
        ClusterTraceRow(
            round=round_index,
            K=state.K,
            cluster=k,
            dist_intra=float(report.dist_intra[k]),
            dist_inter=float(report.dist_inter[k]),
            g_c=float(report.g_c[k]),
            member_count=int(counts[k]),
        )
        for k in range(state.K)
    ]
