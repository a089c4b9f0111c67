from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class RunStatus(str, Enum):
    """Outcome of a run or sweep point."""
    COMPLETED = "completed"
    FAILED = "failed"


class MetricsRecord(BaseModel):
    """Per-round evaluation summary."""

    round: int = Field(description="Round index t", ge=0)

    mean_test_accuracy: float = Field(
        description="Mean top-1 test accuracy across clients",
        ge=0.0,
        le=1.0,
    )

    std_test_accuracy: float = Field(
        description="Population standard deviation of client test accuracy",
        ge=0.0,
    )

    mean_train_loss: float = Field(
        description="Mean train-set cross-entropy of the evaluated models",
        ge=0.0,
    )

    K: int = Field(description="Cluster count after the round", ge=1)

    g_c_mean: float = Field(
        default=float("nan"),
        description="Mean of finite per-cluster G_c (nan when undefined)",
    )

    g_c_std: float = Field(
        default=float("nan"),
        description="Std of finite per-cluster G_c (nan when undefined)",
    )

    ari: Optional[float] = Field(
        default=None,
        description="Adjusted Rand index against the ground truth, when known",
    )

    def to_row(self) -> Dict[str, object]:
        """Row in the metrics CSV layout."""
        return {
            "round": self.round,
            "mean_acc": self.mean_test_accuracy,
            "std_acc": self.std_test_accuracy,
            "mean_loss": self.mean_train_loss,
            "K": self.K,
            "gc_mean": self.g_c_mean,
            "gc_std": self.g_c_std,
            "ari": float("nan") if self.ari is None else self.ari,
        }


METRICS_COLUMNS = ["round", "mean_acc", "std_acc", "mean_loss", "K", "gc_mean", "gc_std", "ari"]


class ClusterTraceRow(BaseModel):
    """One cluster's granularity at the end of a round."""

    round: int = Field(ge=0)
    K: int = Field(ge=1)
    cluster: int = Field(ge=0)
    dist_intra: float = Field(ge=0.0)
    dist_inter: float = Field(description="nan when K = 1")
    g_c: float = Field(description="inf when K = 1 and the cluster has spread")
    member_count: int = Field(ge=0)


TRACE_COLUMNS = ["round", "K", "cluster", "dist_intra", "dist_inter", "g_c", "member_count"]


class SweepPointResult(BaseModel):
    """Summary row of one sweep grid point."""

    point: int = Field(ge=0)
    params: Dict[str, object] = Field(default_factory=dict)
    status: RunStatus
    run_dir: str
    final_mean_acc: Optional[float] = None
    final_std_acc: Optional[float] = None
    final_K: Optional[int] = None
    error: Optional[str] = None

    def to_row(self, keys: List[str]) -> Dict[str, object]:
        row: Dict[str, object] = {"point": self.point}
        row.update({key: self.params.get(key) for key in keys})
        row.update({
            "status": self.status.value,
            "final_mean_acc": self.final_mean_acc,
            "final_std_acc": self.final_std_acc,
            "final_K": self.final_K,
            "error": self.error or "",
        })
        return row
