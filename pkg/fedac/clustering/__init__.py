"""Model similarity, EM re-clustering, cluster number tuning and clustering metrics."""

from .similarity import (
    ReductionMap,
    SimilarityMatrix,
    l2_distance_squared,
    lrcos,
    metric_agreement,
    pairwise_l2,
    pairwise_lrcos,
    pairwise_report,
    reduce,
    similarity_matrix,
    spearman,
    update_map,
)
from .em import Assignment, ClusterSet, e_step, initial_clusters, m_step, nearest_center_l2
from .cnt import CntOutcome, GranularityReport, cnt, granularity
from .metrics import adjusted_rand_index, contingency_table
