"""The server loop: sampling, LocalUpdate orchestration, aggregation and re-clustering."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from fedac.clustering.cnt import cnt
from fedac.clustering.em import Assignment, ClusterSet, e_step, initial_clusters, m_step, nearest_center_l2
from fedac.clustering.similarity import ReductionMap, update_map
from fedac.config import settings
from fedac.data.federated import FederatedData, build_federated_data
from fedac.data.partition import GroundTruthGrouping
from fedac.engine.client import local_update
from fedac.engine.evaluation import cluster_trace, evaluate
from fedac.engine.state import ClientState, ServerState, Stream, stream_rng
from fedac.errors import ClusterStateError, ConfigurationError
from fedac.models.config import ExperimentConfig, LocalInit, RunConfig
from fedac.models.records import ClusterTraceRow, MetricsRecord
from fedac.nn.mlp import MlpSpec, ParamVector, init_params

logger = logging.getLogger(__name__)


class RoundResult(NamedTuple):
    state: ServerState
    clients: List[ClientState]
    metrics: MetricsRecord
    trace: List[ClusterTraceRow]


@dataclass
class ExperimentResult:
    """Metrics stream plus the final state of a run."""

    config: ExperimentConfig
    spec: MlpSpec
    data: FederatedData
    state: ServerState
    clients: List[ClientState]
    metrics: List[MetricsRecord] = field(default_factory=list)
    trace: List[ClusterTraceRow] = field(default_factory=list)


def build_spec(config: ExperimentConfig, data: FederatedData) -> MlpSpec:
    return MlpSpec(
        layer_sizes=[data.input_dim, *config.model.hidden_sizes, data.class_count],
        activation=config.model.activation,
    )


def sample_clients(seed: int, round_index: int, m: int, fraction: float) -> np.ndarray:
    """ceil(fraction * m) distinct client ids, sorted."""
    count = min(m, max(1, math.ceil(fraction * m - 1e-12)))
    return np.sort(stream_rng(seed, Stream.SAMPLE, round_index).choice(m, size=count, replace=False))


def aggregate_global_embedding(updated_clients: Sequence[ClientState]) -> np.ndarray:
    """Unweighted mean of the clients' embedding slices."""
    if not updated_clients:
        raise ClusterStateError("no client updates to aggregate")
    return np.stack([client.params.embedding for client in updated_clients]).mean(axis=0)


def _map_pool(function: Callable, items: Sequence, max_workers: int) -> list:
    if max_workers <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(function, items))


def _reassign(models: Sequence[ParamVector], clusters: ClusterSet,
              reduction_map: Optional[ReductionMap]) -> Assignment:
    """E-step by LrCos, or by squared L2 when no map is passed."""
    if clusters.K == 1:
        return Assignment(np.zeros(len(models), dtype=np.int64), 1)
    if reduction_map is None:
        return nearest_center_l2(models, clusters.centers)
    return e_step(models, clusters, reduction_map)


def _fit_map(models: Sequence[ParamVector], config: RunConfig, round_index: int,
             previous: Optional[ReductionMap] = None) -> Optional[ReductionMap]:
    if len(models) < 2:
        return previous
    return update_map(models, config.D, created_round=round_index)


def build_clients(data: FederatedData, initial: ParamVector) -> List[ClientState]:
    clients = []
    for partition in data.partitions:
        train = data.train_batch(partition.client_id) if partition.train_size else None
        test = data.test_batch(partition.client_id) if partition.test_size else None
        clients.append(ClientState(partition.client_id, initial, partition, train, test))
    return clients


def initialize(
    config: RunConfig,
    spec: MlpSpec,
    data: FederatedData,
    max_workers: Optional[int] = None,
) -> tuple:
    """Common seeded start, one warm-up pass of plain local SGD, then initial clusters."""
    max_workers = settings.max_workers if max_workers is None else max_workers
    seed = config.seed
    m = data.client_count
    if not 1 <= config.effective_k_init <= m:
        raise ConfigurationError(f"K_init={config.K_init} must lie in [1, {m}]")

    initial = init_params(spec, stream_rng(seed, Stream.INIT, 0))
    clients = build_clients(data, initial)

    def warm_up(client: ClientState) -> ClientState:
        return local_update(client, initial, initial.embedding, config, spec,
                            stream_rng(seed, Stream.WARMUP, client.client_id), mu=0.0, lam=0.0)

    clients = _map_pool(warm_up, clients, max_workers)
    models = [client.params for client in clients]
    global_embedding = aggregate_global_embedding(clients)

    if config.clustering_enabled:
        reduction_map = _fit_map(models, config, 0)
        seeds = initial_clusters(models, config.effective_k_init, stream_rng(seed, Stream.INIT, 1))
        assignment = _reassign(models, seeds, reduction_map if config.uses_lrcos else None)
        clusters = m_step(models, assignment, seeds)
    else:
        reduction_map = None
        assignment = Assignment(np.zeros(m, dtype=np.int64), 1)
        clusters = m_step(models, assignment)

    state = ServerState(
        round=0,
        global_embedding=global_embedding,
        clusters=clusters,
        assignment=assignment,
        reduction_map=reduction_map,
        seed=seed,
    )
    logger.info("Initialized %d clients, K=%d, %d parameters", m, clusters.K, spec.param_count)
    return state, clients


def run_round(
    state: ServerState,
    clients: Sequence[ClientState],
    config: RunConfig,
    spec: MlpSpec,
    grouping: Optional[GroundTruthGrouping] = None,
    max_workers: Optional[int] = None,
) -> RoundResult:
    """One communication round; server-side work runs after all client updates finish."""
    max_workers = settings.max_workers if max_workers is None else max_workers
    t = state.round
    m = len(clients)
    sampled = sample_clients(state.seed, t, m, config.sample_fraction)
    start_from_center = config.effective_local_init == LocalInit.CENTER

    def train(client_id: int) -> ClientState:
        client = clients[client_id]
        center = state.center_of(client_id)
        if start_from_center:
            client = client.with_params(center)
        return local_update(client, center, state.global_embedding, config, spec,
                            stream_rng(state.seed, Stream.LOCAL, t, client_id))

    updated = _map_pool(train, [int(i) for i in sampled], max_workers)

    # Serialized server phase
    next_clients = list(clients)
    for client in updated:
        next_clients[client.client_id] = client
    global_embedding = aggregate_global_embedding(updated)
    models = [client.params for client in next_clients]

    reduction_map = state.reduction_map
    if config.clustering_enabled:
        if config.map_refresh_due(t):
            reduction_map = _fit_map(models, config, t, reduction_map)
        clustering_map = reduction_map if config.uses_lrcos else None
        assignment = _reassign(models, state.clusters, clustering_map)
        clusters = m_step(models, assignment, state.clusters)
        if config.cnt_due(t):
            outcome = cnt(models, assignment, clusters, config.a, config.b, clustering_map)
            clusters, assignment = outcome.clusters, outcome.assignment
            if outcome.merges or outcome.splits:
                logger.info("Round %d: CNT -> K=%d", t, outcome.K)
    else:
        # FedAvg: the single center is the mean of this round's updates
        assignment = state.assignment
        sampled_assignment = Assignment(np.zeros(len(updated), dtype=np.int64), 1)
        center = m_step([client.params for client in updated], sampled_assignment).centers[0]
        clusters = ClusterSet((center,), assignment.member_counts())

    next_state = ServerState(
        round=t + 1,
        global_embedding=global_embedding,
        clusters=clusters,
        assignment=assignment,
        reduction_map=reduction_map,
        seed=state.seed,
    )
    metrics = evaluate(next_clients, next_state, config, spec, grouping, round_index=t)
    trace = cluster_trace(next_clients, next_state, config, t) if config.clustering_enabled else []
    logger.info(
        "Round %d: acc=%.4f±%.4f loss=%.4f K=%d",
        t, metrics.mean_test_accuracy, metrics.std_test_accuracy, metrics.mean_train_loss, metrics.K,
    )
    return RoundResult(next_state, next_clients, metrics, trace)


def run_experiment(
    config: ExperimentConfig,
    max_workers: Optional[int] = None,
    on_round: Optional[Callable[[MetricsRecord], None]] = None,
) -> ExperimentResult:
    """Build data, initialize and run config.run.rounds rounds."""
    run = config.run
    data = build_federated_data(config.data, seed=run.seed)
    spec = build_spec(config, data)
    state, clients = initialize(run, spec, data, max_workers)

    result = ExperimentResult(config=config, spec=spec, data=data, state=state, clients=clients)
    for _ in range(run.rounds):
        state, clients, metrics, trace = run_round(state, clients, run, spec, data.grouping, max_workers)
        result.metrics.append(metrics)
        result.trace.extend(trace)
        if on_round is not None:
            on_round(metrics)

    result.state, result.clients = state, clients
    return result
