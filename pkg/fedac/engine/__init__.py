"""Federated training loop, client updates, evaluation and run artifacts."""

from .state import ClientState, ServerState, Stream, stream_rng
from .client import local_update
from .evaluation import client_accuracies, cluster_trace, evaluate, evaluated_model
from .server import (
    ExperimentResult,
    RoundResult,
    aggregate_global_embedding,
    build_spec,
    initialize,
    run_experiment,
    run_round,
    sample_clients,
)
from .artifacts import (
    Snapshot,
    SnapshotMeta,
    read_snapshot,
    read_vectors,
    write_run_artifacts,
    write_snapshot,
    write_vectors,
)
