import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import vector
from fedac.clustering import (
    ReductionMap,
    l2_distance_squared,
    lrcos,
    metric_agreement,
    pairwise_l2,
    pairwise_report,
    reduce,
    similarity_matrix,
    spearman,
    update_map,
)
from fedac.data.divergence import label_kl
from fedac.errors import InsufficientDataError, ShapeError


def random_stack(rng, count=10, dim=40):
    return [vector(rng.normal(size=dim)) for _ in range(count)]


class TestUpdateMap:
    def test_rows_are_orthonormal(self, rng):
        reduction_map = update_map(random_stack(rng), D=6)
        np.testing.assert_allclose(reduction_map.matrix @ reduction_map.matrix.T, np.eye(6), atol=1e-8)

    def test_rank_one_stack(self, rng):
        direction, offset = rng.normal(size=8), rng.normal(size=8)
        models = [vector(c * direction + offset) for c in (-2.0, -0.5, 1.0, 3.0)]
        reduction_map = update_map(models, D=5)
        assert reduction_map.dimension == 1
        for a in models:
            for b in models:
                projected = float(np.sum((reduce(a, reduction_map) - reduce(b, reduction_map)) ** 2))
                assert projected == pytest.approx(l2_distance_squared(a, b), abs=1e-8)

    def test_matches_dense_covariance_eigenvectors(self, rng):
        models = random_stack(rng, count=10, dim=40)
        reduction_map = update_map(models, D=4)
        stack = np.stack([m.values for m in models])
        centered = stack - stack.mean(axis=0)
        eigenvalues, eigenvectors = np.linalg.eigh(centered.T @ centered)
        top = eigenvectors[:, np.argsort(eigenvalues)[::-1][:4]].T
        for row, expected in zip(reduction_map.matrix, top):
            sign = 1.0 if row @ expected > 0 else -1.0
            np.testing.assert_allclose(row, sign * expected, atol=1e-6)

    def test_dimension_clamped_by_model_count(self, rng):
        assert update_map(random_stack(rng, count=5), D=50).dimension == 4

    def test_sign_convention(self, rng):
        reduction_map = update_map(random_stack(rng), D=3)
        for row in reduction_map.matrix:
            assert row[np.argmax(np.abs(row))] > 0

    def test_needs_two_models(self, rng):
        with pytest.raises(InsufficientDataError):
            update_map(random_stack(rng, count=1), D=2)

    def test_identical_models_give_empty_map(self):
        reduction_map = update_map([vector([1.0, 2.0])] * 3, D=2)
        assert reduction_map.dimension == 0


class TestLrCos:
    def identity_map(self):
        return ReductionMap(np.eye(2), np.zeros(2))

    def test_self_similarity(self, rng):
        models = random_stack(rng)
        reduction_map = update_map(models, D=5)
        assert lrcos(models[0], models[0], reduction_map) == pytest.approx(1.0, abs=1e-12)

    def test_hand_computed(self):
        assert lrcos(vector([1.0, 1.0]), vector([1.0, 0.0]), self.identity_map()) == pytest.approx(
            1 / math.sqrt(2), abs=1e-12
        )

    def test_orthogonal(self):
        assert lrcos(vector([0.0, 3.0]), vector([2.0, 0.0]), self.identity_map()) == pytest.approx(0.0)

    def test_degenerate_vector_scores_zero(self):
        assert lrcos(vector([0.0, 0.0]), vector([1.0, 0.0]), self.identity_map()) == 0.0

    def test_rejects_wrong_dimension(self):
        with pytest.raises(ShapeError):
            lrcos(vector([1.0, 2.0, 3.0]), vector([1.0, 2.0, 3.0]), self.identity_map())

    @given(st.floats(min_value=0.01, max_value=100.0), st.integers(min_value=0, max_value=1000))
    def test_scale_invariant_about_center(self, c, seed):
        rng = np.random.default_rng(seed)
        models = random_stack(rng, count=6, dim=12)
        reduction_map = update_map(models, D=3)
        u = rng.normal(size=12)
        if np.linalg.norm(reduce(reduction_map.mean_vector + u, reduction_map)) < 1e-6:
            return
        value = lrcos(vector(reduction_map.mean_vector + c * u), vector(reduction_map.mean_vector + u), reduction_map)
        assert value == pytest.approx(1.0, abs=1e-9)

    @given(st.integers(min_value=0, max_value=1000))
    def test_bounded(self, seed):
        rng = np.random.default_rng(seed)
        models = random_stack(rng, count=5, dim=7)
        reduction_map = update_map(models, D=3)
        values = similarity_matrix(models, models[:2], reduction_map).values
        assert np.all(values <= 1.0) and np.all(values >= -1.0)


class TestDistances:
    def test_hand_computed(self):
        assert l2_distance_squared(vector([1.1]), vector([5.0])) == pytest.approx(15.21)
        assert l2_distance_squared(vector([2.0, 3.0]), vector([2.0, 3.0])) == 0.0

    def test_matches_naive_loop(self, rng):
        for _ in range(5):
            a, b = rng.normal(size=9), rng.normal(size=9)
            expected = sum((x - y) ** 2 for x, y in zip(a, b))
            assert l2_distance_squared(vector(a), vector(b)) == pytest.approx(expected, abs=1e-12)

    def test_pairwise_is_symmetric(self, rng):
        matrix = pairwise_l2(random_stack(rng, count=4, dim=3))
        np.testing.assert_allclose(matrix, matrix.T)
        np.testing.assert_allclose(np.diag(matrix), 0.0)


class TestReports:
    def test_pairwise_report_blocks(self, rng):
        models = random_stack(rng, count=4, dim=6)
        reduction_map = update_map(models, D=2)
        histograms = rng.integers(0, 10, size=(4, 3))
        report = pairwise_report(models, histograms, reduction_map, centers=models[:2])
        assert list(report) == ["lrcos", "l2", "kl", "center_lrcos"]
        for name in ("lrcos", "l2", "kl"):
            assert report[name].shape == (4, 4)
            assert list(report[name].columns) == ["0", "1", "2", "3"]
        assert report["center_lrcos"].shape == (4, 2)
        np.testing.assert_array_equal(np.diag(report["lrcos"].to_numpy()), 1.0)
        np.testing.assert_allclose(report["center_lrcos"].to_numpy(), report["lrcos"].to_numpy()[:, :2], atol=1e-12)
        for i in range(4):
            for j in range(4):
                assert report["kl"].iloc[i, j] == pytest.approx(label_kl(histograms[i], histograms[j]), abs=1e-12)

    def test_report_without_centers(self, rng):
        models = random_stack(rng, count=3, dim=5)
        report = pairwise_report(models, rng.integers(1, 5, size=(3, 2)), update_map(models, D=2))
        assert "center_lrcos" not in report

    def test_spearman_of_monotone_series(self):
        assert spearman([1, 2, 3, 4], [10, 20, 35, 80]) == pytest.approx(1.0)
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_metric_agreement_keys(self, rng):
        models = random_stack(rng, count=6, dim=5)
        agreement = metric_agreement(models, rng.integers(1, 10, size=(6, 3)), update_map(models, D=3))
        assert set(agreement) == {"lrcos", "l2"}
        assert all(-1.0 <= value <= 1.0 for value in agreement.values())
