import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import vector
from fedac.clustering import (
    Assignment,
    ClusterSet,
    ReductionMap,
    adjusted_rand_index,
    cnt,
    contingency_table,
    e_step,
    granularity,
    initial_clusters,
    m_step,
    nearest_center_l2,
    similarity_matrix,
    update_map,
)
from fedac.data import GroundTruthGrouping
from fedac.errors import ClusterStateError, ConfigurationError, ShapeError

IDENTITY_2D = ReductionMap(np.eye(2), np.zeros(2))


def clusters_of(*centers):
    return ClusterSet(tuple(vector(c) for c in centers), np.zeros(len(centers), dtype=np.int64))


def models_of(*points):
    return [vector(p) for p in points]


class TestAssignment:
    def test_matrix_is_one_hot(self):
        assignment = Assignment([0, 2, 1, 2], 3)
        matrix = assignment.matrix
        np.testing.assert_array_equal(matrix.sum(axis=1), 1)
        np.testing.assert_array_equal(matrix.sum(axis=0), assignment.member_counts())

    def test_from_matrix_rejects_multi_hot(self):
        with pytest.raises(ClusterStateError):
            Assignment.from_matrix([[1, 1], [0, 1]])

    def test_rejects_label_out_of_range(self):
        with pytest.raises(ClusterStateError):
            Assignment([0, 3], 2)


class TestEStep:
    def test_clear_argmax(self):
        assignment = e_step(models_of([0.9, 0.2]), clusters_of([1.0, 0.0], [0.0, 1.0]), IDENTITY_2D)
        np.testing.assert_array_equal(assignment.matrix, [[1, 0]])

    def test_tie_goes_to_lowest_index(self):
        assignment = e_step(models_of([1.0, 1.0]), clusters_of([1.0, 0.0], [0.0, 1.0]), IDENTITY_2D)
        np.testing.assert_array_equal(assignment.matrix, [[1, 0]])

    def test_matches_brute_force_argmax(self, rng):
        models = [vector(rng.normal(size=10)) for _ in range(12)]
        reduction_map = update_map(models, D=4)
        clusters = ClusterSet(tuple(models[:3]), np.zeros(3))
        assignment = e_step(models, clusters, reduction_map)
        values = similarity_matrix(models, clusters.centers, reduction_map).values
        for i in range(12):
            best = max(range(3), key=lambda k: (values[i, k], -k))
            assert assignment.labels[i] == best

    def test_identical_models_share_a_cluster(self, rng):
        model = vector(rng.normal(size=6))
        other = vector(rng.normal(size=6))
        reduction_map = update_map([model, other, vector(rng.normal(size=6))], D=2)
        assignment = e_step([model, model], ClusterSet((model, other), np.zeros(2)), reduction_map)
        assert assignment.labels[0] == assignment.labels[1]

    def test_nearest_center(self):
        assignment = nearest_center_l2(models_of([0.0, 0.0], [4.0, 4.0]), [vector([3.0, 3.0]), vector([0.5, 0.0])])
        np.testing.assert_array_equal(assignment.labels, [1, 0])


class TestMStep:
    def test_midpoint(self):
        clusters = m_step(models_of([0.0, 0.0], [2.0, 2.0]), Assignment([0, 0], 1))
        np.testing.assert_allclose(clusters.centers[0].values, [1.0, 1.0])

    def test_single_member_is_exact(self, rng):
        model = vector(rng.normal(size=5))
        clusters = m_step([model], Assignment([0], 1))
        np.testing.assert_array_equal(clusters.centers[0].values, model.values)

    def test_matches_grouped_mean(self, rng):
        models = [vector(rng.normal(size=4)) for _ in range(9)]
        labels = rng.integers(0, 3, size=9)
        labels[:3] = [0, 1, 2]
        clusters = m_step(models, Assignment(labels, 3))
        for k in range(3):
            expected = np.mean([models[i].values for i in range(9) if labels[i] == k], axis=0)
            np.testing.assert_allclose(clusters.centers[k].values, expected, atol=1e-12)
            assert clusters.member_counts[k] == np.sum(labels == k)

    def test_empty_cluster_keeps_previous_center(self):
        previous = clusters_of([0.0, 0.0], [9.0, 9.0])
        clusters = m_step(models_of([1.0, 1.0]), Assignment([0], 2), previous)
        np.testing.assert_array_equal(clusters.centers[1].values, [9.0, 9.0])
        assert clusters.empty.tolist() == [False, True]

    def test_empty_cluster_without_previous(self):
        with pytest.raises(ClusterStateError):
            m_step(models_of([1.0, 1.0]), Assignment([0], 2))

    def test_rejects_mismatched_assignment(self):
        with pytest.raises(ShapeError):
            m_step(models_of([1.0, 1.0]), Assignment([0, 0], 1))

    def test_initial_clusters_are_distinct_clients(self, rng):
        models = [vector(rng.normal(size=3)) for _ in range(6)]
        clusters = initial_clusters(models, 3, np.random.default_rng(0))
        assert clusters.K == 3
        ids = {next(i for i, m in enumerate(models) if m is c) for c in clusters.centers}
        assert len(ids) == 3

    @pytest.mark.parametrize("seed", range(10))
    def test_initial_clusters_cover_separated_groups(self, seed):
        rng = np.random.default_rng(seed)
        models = [vector(rng.normal(scale=0.01, size=2) + [10.0 * g, 0.0]) for g in range(3) for _ in range(10)]
        clusters = initial_clusters(models, 3, rng)
        assert sorted(round(c.values[0] / 10) for c in clusters.centers) == [0, 1, 2]

    def test_initial_clusters_with_coincident_models(self):
        models = [vector([1.0, 1.0]) for _ in range(5)]
        clusters = initial_clusters(models, 4, np.random.default_rng(0))
        ids = {next(i for i, m in enumerate(models) if m is c) for c in clusters.centers}
        assert len(ids) == 4


class TestGranularity:
    def test_hand_computed(self):
        report = granularity(models_of([1.0, 0.0], [1.2, 0.0], [5.0, 0.0]), Assignment([0, 0, 1], 2),
                             clusters_of([1.1, 0.0], [5.0, 0.0]))
        assert report.dist_intra[0] == pytest.approx(0.01)
        assert report.dist_inter[0] == pytest.approx(15.21)
        assert report.g_c[0] == pytest.approx(0.01 / 15.21)
        assert report.g_c[0] == pytest.approx(0.000657, abs=1e-6)

    def test_singleton_at_its_center(self):
        report = granularity(models_of([5.0, 0.0], [1.0, 0.0]), Assignment([0, 1], 2),
                             clusters_of([5.0, 0.0], [1.0, 0.0]))
        assert report.dist_intra[0] == 0.0
        assert report.g_c[0] == 0.0

    def test_identical_centers_contribute_nothing(self):
        report = granularity(models_of([0.0, 1.0], [0.0, -1.0], [4.0, 0.0]), Assignment([0, 0, 1], 3),
                             clusters_of([0.0, 0.0], [0.0, 0.0], [4.0, 0.0]))
        assert report.dist_inter[0] == pytest.approx(16.0 / 2)

    def test_single_cluster(self):
        report = granularity(models_of([0.0, 0.0], [2.0, 0.0]), Assignment([0, 0], 1), clusters_of([1.0, 0.0]))
        assert not report.inter_defined
        assert report.g_c[0] == np.inf


class TestCnt:
    def test_no_op_band(self):
        models = models_of([-2.0, 0.0], [2.0, 0.0], [1.0, 0.0], [5.0, 0.0])
        assignment = Assignment([0, 0, 1, 1], 2)
        clusters = clusters_of([0.0, 0.0], [3.0, 0.0])
        outcome = cnt(models, assignment, clusters, 0.2, 0.8)
        assert outcome.K == 2
        assert outcome.clusters is clusters
        assert outcome.assignment is assignment
        assert outcome.merges == () and outcome.splits == ()

    def test_merge(self):
        models = models_of([1.0, 0.0], [1.2, 0.0], [5.0, 0.0])
        outcome = cnt(models, Assignment([0, 0, 1], 2), clusters_of([1.1, 0.0], [5.0, 0.0]), 0.2, 0.8)
        assert outcome.K == 1
        assert outcome.merges == ((0, 1),)
        np.testing.assert_allclose(outcome.clusters.centers[0].values, [2.4, 0.0])
        np.testing.assert_array_equal(outcome.assignment.labels, [0, 0, 0])

    def test_split(self):
        models = models_of([-0.01, 0.0], [0.01, 0.0], [9.99, 0.0], [10.01, 0.0], [10.5, 3.0], [10.5, -3.0])
        assignment = Assignment([0, 0, 0, 0, 1, 1], 2)
        clusters = clusters_of([5.0, 0.0], [10.5, 0.0])
        report = granularity(models, assignment, clusters)
        assert report.g_c[0] > 0.8
        assert 0.2 < report.g_c[1] < 0.8

        outcome = cnt(models, assignment, clusters, 0.2, 0.8)
        assert outcome.K == 3
        assert outcome.splits == (0,)
        np.testing.assert_allclose(outcome.clusters.centers[0].values, [0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(outcome.clusters.centers[1].values, [10.5, 0.0], atol=1e-12)
        np.testing.assert_allclose(outcome.clusters.centers[2].values, [10.0, 0.0], atol=1e-12)
        np.testing.assert_array_equal(outcome.assignment.labels, [0, 0, 2, 2, 1, 1])

    def test_single_cluster_with_spread_splits(self):
        models = models_of([0.0, 0.0], [0.1, 0.0], [8.0, 0.0], [8.1, 0.0])
        outcome = cnt(models, Assignment([0, 0, 0, 0], 1), clusters_of([4.05, 0.0]), 0.2, 0.8)
        assert outcome.K == 2
        assert sorted(outcome.assignment.member_counts().tolist()) == [2, 2]

    def test_split_refines_halves_by_lrcos_when_mapped(self):
        # [2, 1] is nearer [0, 1] in L2 but closer in angle to [10, 0]
        models = models_of([10.0, 0.0], [0.0, 1.0], [2.0, 1.0])
        assignment = Assignment([0, 0, 0], 1)
        outcome = cnt(models, assignment, m_step(models, assignment), 0.2, 0.8, IDENTITY_2D)
        labels = outcome.assignment.labels
        assert outcome.K == 2
        assert labels[0] == labels[2] != labels[1]

        plain = cnt(models, assignment, m_step(models, assignment), 0.2, 0.8)
        assert plain.assignment.labels[1] == plain.assignment.labels[2] != plain.assignment.labels[0]

    def test_lrcos_reassignment_with_map(self, rng):
        models = [vector(rng.normal(size=6)) for _ in range(8)]
        reduction_map = update_map(models, D=3)
        labels = np.zeros(8, dtype=np.int64)
        clusters = m_step(models, Assignment(labels, 1))
        outcome = cnt(models, Assignment(labels, 1), clusters, 0.2, 0.8, reduction_map)
        counts = outcome.assignment.member_counts()
        assert counts.sum() == 8 and np.all(counts > 0)
        assert outcome.clusters.K == outcome.K == outcome.assignment.K

    def test_rejects_inverted_thresholds(self):
        with pytest.raises(ConfigurationError):
            cnt(models_of([0.0, 0.0]), Assignment([0], 1), clusters_of([0.0, 0.0]), 0.8, 0.2)


class TestAdjustedRandIndex:
    def test_identical(self):
        assert adjusted_rand_index([0, 0, 1, 1, 2], [0, 0, 1, 1, 2]) == 1.0

    def test_permuted_labels(self):
        assert adjusted_rand_index(Assignment([2, 2, 0, 0, 1], 3), [0, 0, 1, 1, 2]) == pytest.approx(1.0)

    def test_all_in_one_versus_three_groups(self):
        truth = GroundTruthGrouping(np.repeat([0, 1, 2], 10), 3)
        assert adjusted_rand_index(Assignment(np.zeros(30), 1), truth) == pytest.approx(0.0, abs=1e-12)

    def test_contingency_table(self):
        table = contingency_table([0, 0, 1], [1, 0, 0])
        np.testing.assert_array_equal(table, [[1, 1], [1, 0]])

    def test_two_groups_merged(self):
        truth = GroundTruthGrouping(np.repeat([0, 1, 2], 10), 3)
        predicted = Assignment(np.repeat([0, 0, 1], 10), 2)
        assert adjusted_rand_index(predicted, truth) == pytest.approx(36 / 65, abs=1e-12)

    def test_rejects_size_mismatch(self):
        with pytest.raises(ShapeError):
            adjusted_rand_index([0, 1, 1], GroundTruthGrouping([0, 1], 2))
        with pytest.raises(ShapeError):
            contingency_table([0, 1], [0, 1, 1])

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=40))
    def test_symmetric_and_bounded(self, pairs):
        predicted, truth = map(list, zip(*pairs))
        value = adjusted_rand_index(predicted, truth)
        assert value == pytest.approx(adjusted_rand_index(truth, predicted), abs=1e-12)
        assert value <= 1.0 + 1e-12
