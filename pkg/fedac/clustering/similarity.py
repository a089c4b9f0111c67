"""Low-rank cosine similarity between models.

The reduction map is a PCA of the stacked client models, computed through the
small count x count Gram matrix because model dimension far exceeds the
number of models.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from fedac.data.divergence import DEFAULT_EPSILON, pairwise_label_kl
from fedac.errors import InsufficientDataError, ShapeError
from fedac.nn.mlp import ParamVector

logger = logging.getLogger(__name__)

DEGENERATE_NORM = 1e-12
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ReductionMap:
    """D' x dim(w) projection with orthonormal rows, plus its centering offset."""

    matrix: np.ndarray
    mean_vector: np.ndarray
    created_round: int = 0

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        if matrix.size == 0:
            matrix = matrix.reshape(0, np.asarray(self.mean_vector).size)
        mean_vector = np.asarray(self.mean_vector, dtype=np.float64).ravel()
        if matrix.shape[1] != mean_vector.size:
            raise ShapeError(f"map has {matrix.shape[1]} columns, mean has {mean_vector.size} entries")
        matrix.setflags(write=False)
        mean_vector.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "mean_vector", mean_vector)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def model_dim(self) -> int:
        return self.mean_vector.size


@dataclass(frozen=True)
class SimilarityMatrix:
    """Client-by-center LrCos values and which entries were degenerate."""

    values: np.ndarray
    degenerate: np.ndarray
    round: int = 0


def _as_array(model) -> np.ndarray:
    if isinstance(model, ParamVector):
        return model.values
    return np.asarray(model, dtype=np.float64).ravel()


def update_map(model_stack: Sequence, D: int, created_round: int = 0) -> ReductionMap:
    """Fit the top principal directions of the centered model stack."""
    if len(model_stack) < 2:
        raise InsufficientDataError(f"update_map needs at least 2 models, got {len(model_stack)}")
    if D < 1:
        raise ValueError("D must be at least 1")

    stack = np.stack([_as_array(model) for model in model_stack])
    count, model_dim = stack.shape
    mean_vector = stack.mean(axis=0)
    centered = stack - mean_vector

    gram = centered @ centered.T
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    limit = min(D, count - 1, model_dim)
    top = eigenvalues[0] if eigenvalues.size else 0.0
    rank = int(np.sum(eigenvalues > max(top, 0.0) * RANK_TOLERANCE)) if top > 0 else 0
    effective = min(limit, rank)

    rows = (centered.T @ eigenvectors[:, :effective]) / np.sqrt(eigenvalues[:effective])
    rows = rows.T
    # Sign convention: each row's largest-magnitude entry is positive
    for row in rows:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    if effective < D:
        logger.info("Reduction map clamped to %d of %d requested dimensions", effective, D)
    else:
        logger.info("Reduction map refreshed with %d dimensions", effective)
    return ReductionMap(rows.reshape(effective, model_dim), mean_vector, created_round)


def reduce(model, reduction_map: ReductionMap) -> np.ndarray:
    """M (w - mean): the low-rank representation a client would upload."""
    values = _as_array(model)
    if values.size != reduction_map.model_dim:
        raise ShapeError(f"model has {values.size} entries, map expects {reduction_map.model_dim}")
    return reduction_map.matrix @ (values - reduction_map.mean_vector)


def _cosine(u: np.ndarray, v: np.ndarray):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu < DEGENERATE_NORM or nv < DEGENERATE_NORM:
        return 0.0, True
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0)), False


def lrcos(a, b, reduction_map: ReductionMap) -> float:
    """Cosine of the two models after projection; 0 for degenerate vectors."""
    value, degenerate = _cosine(reduce(a, reduction_map), reduce(b, reduction_map))
    if degenerate:
        logger.debug("Degenerate reduced vector, similarity set to 0")
    return value


def l2_distance_squared(a, b) -> float:
    a, b = _as_array(a), _as_array(b)
    if a.size != b.size:
        raise ShapeError(f"vectors differ in length: {a.size} vs {b.size}")
    diff = a - b
    return float(diff @ diff)


def similarity_matrix(models: Sequence, centers: Sequence, reduction_map: ReductionMap,
                      round_index: int = 0) -> SimilarityMatrix:
    """LrCos of every model against every center."""
    reduced_models = [reduce(model, reduction_map) for model in models]
    reduced_centers = [reduce(center, reduction_map) for center in centers]
    values = np.zeros((len(models), len(centers)))
    degenerate = np.zeros((len(models), len(centers)), dtype=bool)
    for i, u in enumerate(reduced_models):
        for k, v in enumerate(reduced_centers):
            values[i, k], degenerate[i, k] = _cosine(u, v)
    if degenerate.any():
        logger.debug("%d degenerate similarity entries", int(degenerate.sum()))
    return SimilarityMatrix(values, degenerate, round_index)


def pairwise_lrcos(models: Sequence, reduction_map: ReductionMap) -> np.ndarray:
    """m x m LrCos; the diagonal is exactly 1 except for degenerate models."""
    similarities = similarity_matrix(models, models, reduction_map)
    values = similarities.values.copy()
    np.fill_diagonal(values, np.where(np.diag(similarities.degenerate), 0.0, 1.0))
    return values


def pairwise_l2(models: Sequence) -> np.ndarray:
    stack = np.stack([_as_array(model) for model in models])
    m = stack.shape[0]
    matrix = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            matrix[i, j] = matrix[j, i] = l2_distance_squared(stack[i], stack[j])
    return matrix


REPORT_BLOCKS = ("lrcos", "l2", "kl", "center_lrcos")


def _matrix_frame(matrix: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(matrix, columns=[str(j) for j in range(matrix.shape[1])])


def pairwise_report(
    models: Sequence,
    histograms: Sequence,
    reduction_map: ReductionMap,
    centers: Optional[Sequence] = None,
    epsilon: float = DEFAULT_EPSILON,
) -> Dict[str, pd.DataFrame]:
    """Matrix-shaped blocks: lrcos, l2 and kl are m x m, center_lrcos is m x K.

    Row i is client i; columns are client ids, or cluster ids for center_lrcos.
    """
    blocks = {
        "lrcos": _matrix_frame(pairwise_lrcos(models, reduction_map)),
        "l2": _matrix_frame(pairwise_l2(models)),
        "kl": _matrix_frame(pairwise_label_kl(histograms, epsilon)),
    }
    if centers:
        blocks["center_lrcos"] = _matrix_frame(similarity_matrix(models, centers, reduction_map).values)
    return blocks


def spearman(x, y) -> float:
    result = spearmanr(np.asarray(x), np.asarray(y))
    return float(result.statistic if hasattr(result, "statistic") else result[0])


def metric_agreement(models: Sequence, histograms: Sequence, reduction_map: ReductionMap,
                     epsilon: float = DEFAULT_EPSILON) -> dict:
    """How well LrCos and -L2 each track -KL of label distributions over client pairs."""
    upper = np.triu_indices(len(models), k=1)
    kl = pairwise_label_kl(histograms, epsilon)
    negative_kl = -0.5 * (kl + kl.T)[upper]
    return {
        "lrcos": spearman(pairwise_lrcos(models, reduction_map)[upper], negative_kl),
        "l2": spearman(-pairwise_l2(models)[upper], negative_kl),
    }
