"""Run directory artifacts: metrics/trace CSVs, resolved config echo and the final-state snapshot.

Binary files share one layout: a little-endian uint64 vector count, then for
every vector a uint64 length followed by that many little-endian float64
values.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import yaml
from typing_extensions import TypedDict

from fedac.clustering.em import Assignment
from fedac.clustering.similarity import ReductionMap
from fedac.config import settings
from fedac.data.partition import partition_report
from fedac.engine.server import ExperimentResult
from fedac.errors import ClusterStateError, SnapshotError
from fedac.models.config import ExperimentConfig
from fedac.models.records import METRICS_COLUMNS, TRACE_COLUMNS, ClusterTraceRow, MetricsRecord
from fedac.nn.mlp import MlpSpec, ParamVector

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

METRICS_FILE = "metrics.csv"
TRACE_FILE = "cluster_trace.csv"
RESOLVED_CONFIG_FILE = "config.resolved.yaml"
SNAPSHOT_DIR = "snapshot"

CLIENTS_FILE = "clients.bin"
CENTERS_FILE = "centers.bin"
ASSIGNMENT_FILE = "assignment.bin"
MAP_FILE = "map.bin"
PARTITIONS_FILE = "partitions.csv"
META_FILE = "meta.yaml"

_COUNT = np.dtype("<u8")
_VALUE = np.dtype("<f8")


def write_vectors(path: PathLike, vectors: Iterable[np.ndarray]) -> None:
    vectors = [np.asarray(v, dtype=np.float64).ravel() for v in vectors]
    with open(path, "wb") as handle:
        handle.write(np.array([len(vectors)], dtype=_COUNT).tobytes())
        for vector in vectors:
            handle.write(np.array([vector.size], dtype=_COUNT).tobytes())
            handle.write(vector.astype(_VALUE).tobytes())


def read_vectors(path: PathLike) -> List[np.ndarray]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise SnapshotError(f"cannot read {path}: {e}") from e

    def take_count(offset: int) -> int:
        if offset + _COUNT.itemsize > len(raw):
            raise SnapshotError(f"{path.name}: truncated at byte {offset}")
        return int(np.frombuffer(raw, dtype=_COUNT, count=1, offset=offset)[0])

    count = take_count(0)
    offset = _COUNT.itemsize
    vectors = []
    for index in range(count):
        length = take_count(offset)
        offset += _COUNT.itemsize
        end = offset + length * _VALUE.itemsize
        if end > len(raw):
            raise SnapshotError(f"{path.name}: vector {index} runs past the end of the file")
        vectors.append(np.frombuffer(raw, dtype=_VALUE, count=length, offset=offset).copy())
        offset = end
    if offset != len(raw):
        raise SnapshotError(f"{path.name}: {len(raw) - offset} trailing bytes")
    return vectors


def _write_csv(frame: pd.DataFrame, path: PathLike) -> None:
    frame.to_csv(path, index=False, float_format=settings.float_format, na_rep="nan", lineterminator="\n")


def metrics_frame(metrics: Sequence[MetricsRecord]) -> pd.DataFrame:
    return pd.DataFrame([record.to_row() for record in metrics], columns=METRICS_COLUMNS)


def trace_frame(trace: Sequence[ClusterTraceRow]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in trace], columns=TRACE_COLUMNS)


def resolved_config(config: ExperimentConfig) -> dict:
    """The config as a plain document that validates as an input file."""
    return config.model_dump(mode="json", by_alias=True)


def write_resolved_config(config: ExperimentConfig, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(resolved_config(config), handle, sort_keys=False)


class SnapshotMeta(TypedDict):
    """Contents of meta.yaml."""

    round: int
    seed: int
    K: int
    client_count: int
    mode: str
    D: int
    layer_sizes: List[int]
    activation: str
    split_index: int
    map_created_round: Optional[int]
    kl_epsilon: float


@dataclass(frozen=True)
class Snapshot:
    """Final state of a run as read back from disk."""

    spec: MlpSpec
    clients: List[ParamVector]
    centers: List[ParamVector]
    assignment: Assignment
    reduction_map: Optional[ReductionMap]
    partitions: pd.DataFrame
    trace: pd.DataFrame
    meta: SnapshotMeta

    @property
    def histograms(self) -> np.ndarray:
        columns = [c for c in self.partitions.columns if c.startswith("class_")]
        return self.partitions[columns].to_numpy(dtype=np.float64)


def write_snapshot(result: ExperimentResult, directory: PathLike) -> Path:
    """Write the final client models, centers, assignment, map and reports."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = result.state

    write_vectors(directory / CLIENTS_FILE, [client.params.values for client in result.clients])
    write_vectors(directory / CENTERS_FILE, [center.values for center in state.clusters.centers])
    write_vectors(directory / ASSIGNMENT_FILE, state.assignment.matrix.astype(np.float64))
    if state.reduction_map is not None:
        write_vectors(directory / MAP_FILE, [state.reduction_map.mean_vector, *state.reduction_map.matrix])

    _write_csv(partition_report(result.data.partitions, result.data.class_count), directory / PARTITIONS_FILE)
    last_round = state.round - 1
    _write_csv(trace_frame([row for row in result.trace if row.round == last_round]), directory / TRACE_FILE)

    meta: SnapshotMeta = {
        "round": state.round,
        "seed": state.seed,
        "K": state.K,
        "client_count": len(result.clients),
        "mode": result.config.run.mode.value,
        "D": result.config.run.D,
        "layer_sizes": list(result.spec.layer_sizes),
        "activation": result.spec.activation.value,
        "split_index": result.spec.split_index,
        "map_created_round": None if state.reduction_map is None else state.reduction_map.created_round,
        "kl_epsilon": result.config.data.kl_epsilon,
    }
    with open(directory / META_FILE, "w", encoding="utf-8") as handle:
        yaml.safe_dump(meta, handle, sort_keys=False)

    logger.info("Snapshot written to %s", directory)
    return directory


def read_snapshot(directory: PathLike) -> Snapshot:
    directory = Path(directory)
    if not (directory / META_FILE).is_file():
        raise SnapshotError(f"{directory} is not a snapshot directory (no {META_FILE})")
    try:
        meta = yaml.safe_load((directory / META_FILE).read_text(encoding="utf-8")) or {}
        spec = MlpSpec(layer_sizes=meta["layer_sizes"], activation=meta["activation"])
    except (yaml.YAMLError, KeyError, ValueError) as e:
        raise SnapshotError(f"invalid {META_FILE}: {e}") from e

    def params(vectors: List[np.ndarray], name: str) -> List[ParamVector]:
        bad = [i for i, v in enumerate(vectors) if v.size != spec.param_count]
        if bad:
            raise SnapshotError(f"{name}: vector {bad[0]} does not match {spec.param_count} parameters")
        return [ParamVector(v, spec.split_index) for v in vectors]

    clients = params(read_vectors(directory / CLIENTS_FILE), CLIENTS_FILE)
    centers = params(read_vectors(directory / CENTERS_FILE), CENTERS_FILE)
    rows = read_vectors(directory / ASSIGNMENT_FILE)
    try:
        assignment = Assignment.from_matrix(np.stack(rows)) if rows else Assignment(np.zeros(0), len(centers))
    except (ValueError, ClusterStateError) as e:
        raise SnapshotError(f"{ASSIGNMENT_FILE}: {e}") from e
    if assignment.K != len(centers) or assignment.client_count != len(clients):
        raise SnapshotError("assignment shape does not match clients and centers")

    reduction_map = None
    if (directory / MAP_FILE).is_file():
        mean_vector, *matrix_rows = read_vectors(directory / MAP_FILE)
        matrix = np.stack(matrix_rows) if matrix_rows else np.zeros((0, mean_vector.size))
        reduction_map = ReductionMap(matrix, mean_vector, meta.get("map_created_round") or 0)

    return Snapshot(
        spec=spec,
        clients=clients,
        centers=centers,
        assignment=assignment,
        reduction_map=reduction_map,
        partitions=pd.read_csv(directory / PARTITIONS_FILE, float_precision="round_trip"),
        trace=pd.read_csv(directory / TRACE_FILE, float_precision="round_trip"),
        meta=meta,
    )


def write_run_artifacts(result: ExperimentResult, directory: PathLike) -> Path:
    """metrics.csv, cluster_trace.csv, config.resolved.yaml and the snapshot directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_csv(metrics_frame(result.metrics), directory / METRICS_FILE)
    _write_csv(trace_frame(result.trace), directory / TRACE_FILE)
    write_resolved_config(result.config, directory / RESOLVED_CONFIG_FILE)
    if result.config.output.snapshot:
        write_snapshot(result, directory / SNAPSHOT_DIR)
    logger.info("Run artifacts written to %s", directory)
    return directory
