import numpy as np

from fedac.errors import ShapeError

DEFAULT_EPSILON = 1e-6


def label_kl(p, q, epsilon: float = DEFAULT_EPSILON) -> float:
    """KL(p~ || q~) in nats over epsilon-smoothed, renormalized label histograms."""
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.size != q.size:
        raise ShapeError(f"histograms differ in length: {p.size} vs {q.size}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("histograms must be non-negative")

    p = (p + epsilon) / (p + epsilon).sum()
    q = (q + epsilon) / (q + epsilon).sum()
    return max(float(np.sum(p * np.log(p / q))), 0.0)


def pairwise_label_kl(histograms, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """m x m matrix with entry (i, j) = label_kl(h_i, h_j)."""
    histograms = [np.asarray(h, dtype=np.float64) for h in histograms]
    m = len(histograms)
    matrix = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j:
                matrix[i, j] = label_kl(histograms[i], histograms[j], epsilon)
    return matrix
