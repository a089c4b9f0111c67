import numpy as np
from sklearn.metrics import adjusted_rand_score
from sklearn.metrics.cluster import contingency_matrix

from fedac.errors import ShapeError


def _labels(partition) -> np.ndarray:
    if hasattr(partition, "labels"):
        return np.asarray(partition.labels)
    if hasattr(partition, "group_of_client"):
        return np.asarray(partition.group_of_client)
    return np.asarray(partition).ravel()


def _paired_labels(predicted, truth):
    labels_pred, labels_true = _labels(predicted), _labels(truth)
    if labels_pred.size != labels_true.size:
        raise ShapeError(f"partitions cover {labels_pred.size} and {labels_true.size} clients")
    return labels_pred, labels_true


def contingency_table(predicted, truth) -> np.ndarray:
    """Truth groups as rows, predicted clusters as columns."""
    labels_pred, labels_true = _paired_labels(predicted, truth)
    return contingency_matrix(labels_true, labels_pred)


def adjusted_rand_index(predicted, truth) -> float:
    """Chance-corrected agreement of two partitions of the same clients.

    Accepts an Assignment, a GroundTruthGrouping or a plain label vector on
    either side.
    """
    labels_pred, labels_true = _paired_labels(predicted, truth)
    return float(adjusted_rand_score(labels_true, labels_pred))
