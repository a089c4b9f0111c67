from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fedac.nn.mlp import Activation


class Mode(str, Enum):
    """Training algorithm run by the engine."""
    FEDAC = "fedac"
    FEDAVG = "fedavg"
    FESEM_SHARED = "fesem_shared"
    CLUSTER_ONLY = "cluster_only"
    GLOBAL_ONLY = "global_only"


class LocalInit(str, Enum):
    """Where a sampled client starts its local epochs."""
    PERSONAL = "personal"
    CENTER = "center"


class Similarity(str, Enum):
    """Client-to-center measure used when re-clustering."""
    LRCOS = "lrcos"
    L2 = "l2"


class DataSource(str, Enum):
    SYNTHETIC = "synthetic"
    FILE = "file"


class PartitionScheme(str, Enum):
    GROUPS = "groups"
    DIRICHLET = "dirichlet"
    PATHOLOGICAL = "pathological"


class StrictModel(BaseModel):
    """Base for config sections: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True, use_enum_values=False)


class ModelConfig(StrictModel):
    """Hidden layers of the MLP; input width and class count come from the data."""

    hidden_sizes: List[int] = Field(
        default=[32, 16],
        description="Hidden layer widths (at least one)",
        min_length=1,
        examples=[[32, 16]],
    )

    activation: Activation = Field(
        default=Activation.RELU,
        description="Hidden activation (relu or tanh)",
    )

    @field_validator("hidden_sizes")
    @classmethod
    def validate_hidden_sizes(cls, v):
        if any(size < 1 for size in v):
            raise ValueError("hidden sizes must be positive")
        return v


class SyntheticTaskConfig(StrictModel):
    """Generator parameters for synthetic data."""

    group_count: int = Field(default=3, ge=1, description="Latent client groups")
    clients_per_group: int = Field(default=10, ge=1)
    input_dim: int = Field(default=16, ge=1)
    class_count: int = Field(default=4, ge=2)
    task_shift: float = Field(default=1.0, ge=0.0, description="Rotation magnitude between group labelers")
    noise: float = Field(default=0.1, ge=0.0, description="Std of logit noise")
    client_bias: float = Field(default=0.3, ge=0.0, description="Std of per-client logit offsets")
    pool_size: int = Field(default=20000, ge=2, description="Pool size for dirichlet/pathological schemes")


class PartitionConfig(StrictModel):
    """How samples are split among clients."""

    scheme: PartitionScheme = Field(default=PartitionScheme.GROUPS)
    clients: int = Field(default=30, ge=1, description="Client count for dirichlet/pathological schemes")
    alpha: float = Field(default=0.1, gt=0.0, description="Dirichlet concentration")
    labels_per_client: int = Field(default=2, ge=1, description="n for the pathological scheme")
    size_min: int = Field(default=50, ge=2)
    size_max: int = Field(default=350, ge=2)
    train_fraction: float = Field(default=0.8, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def validate_size_range(self):
        if self.size_min > self.size_max:
            raise ValueError("size_min must not exceed size_max")
        return self


class DataConfig(StrictModel):
    """Dataset source and partitioning."""

    source: DataSource = Field(default=DataSource.SYNTHETIC)
    path: Optional[str] = Field(default=None, description="Dataset file for source=file")
    seed: Optional[int] = Field(default=None, description="Data seed; defaults to run.seed")
    synthetic: SyntheticTaskConfig = Field(default_factory=SyntheticTaskConfig)
    partition: PartitionConfig = Field(default_factory=PartitionConfig)
    kl_epsilon: float = Field(default=1e-6, gt=0.0)

    @model_validator(mode="after")
    def validate_source(self):
        if self.source == DataSource.FILE:
            if not self.path:
                raise ValueError("data.path is required when source is 'file'")
            if self.partition.scheme == PartitionScheme.GROUPS:
                raise ValueError("the 'groups' scheme needs synthetic data")
        if self.partition.scheme == PartitionScheme.PATHOLOGICAL and self.source == DataSource.SYNTHETIC:
            if self.partition.labels_per_client > self.synthetic.class_count:
                raise ValueError("labels_per_client exceeds the class count")
        return self

    @property
    def client_count(self) -> int:
        if self.partition.scheme == PartitionScheme.GROUPS:
            return self.synthetic.group_count * self.synthetic.clients_per_group
        return self.partition.clients


class RunConfig(StrictModel):
    """Algorithm hyperparameters for one experiment."""

    eta: float = Field(default=0.01, gt=0.0, description="Learning rate")
    mu: float = Field(default=0.5, ge=0.0, description="Intra-cluster regularization strength")
    lam: float = Field(default=0.1, ge=0.0, alias="lambda", description="Global-embedding regularization strength")
    K_init: int = Field(default=3, ge=1, description="Initial cluster count")
    D: int = Field(default=50, ge=1, description="Reduction dimension for LrCos")
    a: float = Field(default=0.2, gt=0.0, description="Lower G_c threshold (merge)")
    b: float = Field(default=0.8, gt=0.0, description="Upper G_c threshold (split)")
    rounds: int = Field(default=200, ge=0, description="Communication rounds T")
    sample_fraction: float = Field(default=0.25, gt=0.0, le=1.0)
    local_epochs: int = Field(default=5, ge=1)
    batch_size: int = Field(default=32, ge=1)
    map_refresh_period: int = Field(default=100, ge=1)
    cnt_period: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0)
    mode: Mode = Field(default=Mode.FEDAC)
    local_init: Optional[LocalInit] = Field(
        default=None,
        description="Local training start point; defaults by mode",
    )
    similarity: Similarity = Field(
        default=Similarity.LRCOS,
        description="Re-clustering measure: lrcos (highest LrCos) or l2 (nearest center)",
    )

    @model_validator(mode="after")
    def validate_invariants(self):
        if self.a >= self.b:
            raise ValueError(f"CNT thresholds need a < b, got a={self.a}, b={self.b}")
        if self.eta * (self.effective_mu + self.effective_lambda) >= 2.0:
            raise ValueError("eta * (mu + lambda) must stay below 2 for a stable proximal step")
        return self

    @property
    def effective_mu(self) -> float:
        if self.mode in (Mode.FEDAVG, Mode.FESEM_SHARED, Mode.GLOBAL_ONLY):
            return 0.0
        return self.mu

    @property
    def effective_lambda(self) -> float:
        if self.mode in (Mode.FEDAVG, Mode.FESEM_SHARED, Mode.CLUSTER_ONLY):
            return 0.0
        return self.lam

    @property
    def effective_local_init(self) -> LocalInit:
        if self.mode in (Mode.FEDAVG, Mode.FESEM_SHARED):
            return LocalInit.CENTER
        return self.local_init or LocalInit.PERSONAL

    @property
    def effective_k_init(self) -> int:
        return 1 if self.mode == Mode.FEDAVG else self.K_init

    @property
    def clustering_enabled(self) -> bool:
        return self.mode != Mode.FEDAVG

    @property
    def evaluates_center(self) -> bool:
        # A client that restarts from its center every round deploys the center
        return self.effective_local_init == LocalInit.CENTER

    @property
    def uses_lrcos(self) -> bool:
        return self.similarity == Similarity.LRCOS

    def cnt_due(self, round_index: int) -> bool:
        """Every cnt_period rounds once the first map refresh period has passed."""
        return (
            self.clustering_enabled
            and round_index >= self.map_refresh_period
            and round_index % self.cnt_period == 0
        )

    def map_refresh_due(self, round_index: int) -> bool:
        return round_index % self.map_refresh_period == 0


class OutputConfig(StrictModel):
    """Where and what a run writes."""

    dir: Optional[str] = Field(default=None, description="Run directory; defaults under settings.output_dir")
    snapshot: bool = Field(default=True, description="Write the final-state snapshot")


class ExperimentConfig(StrictModel):
    """A complete experiment: hyperparameters, model, data and output."""

    run: RunConfig = Field(default_factory=RunConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def validate_cluster_count(self):
        if self.run.effective_k_init > self.data.client_count:
            raise ValueError(
                f"K_init={self.run.K_init} exceeds the client count {self.data.client_count}"
            )
        return self


class RunSection(RunConfig):
    """The run section of a config document: the learning rate must be explicit."""

    eta: float = Field(gt=0.0, description="Learning rate")


class ExperimentConfigFile(ExperimentConfig):
    """Schema of a YAML experiment document."""

    run: RunSection

    def to_experiment(self) -> ExperimentConfig:
        return ExperimentConfig.model_validate(self.model_dump(by_alias=True))
