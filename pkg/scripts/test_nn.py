import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import vector
from fedac.errors import NumericError, ShapeError
from fedac.nn.mlp import (
    Batch,
    MlpSpec,
    ParamVector,
    forward,
    init_params,
    local_objective,
    loss_and_grad,
    regularized_step,
    split_params,
    unpack,
)


def naive_forward(spec, params, features):
    a = features
    layers = unpack(spec, params.values)
    for weights, bias in layers[:-1]:
        z = np.zeros((a.shape[0], weights.shape[1]))
        for r in range(a.shape[0]):
            for j in range(weights.shape[1]):
                z[r, j] = sum(a[r, i] * weights[i, j] for i in range(weights.shape[0])) + bias[j]
        a = np.tanh(z) if spec.activation.value == "tanh" else np.maximum(z, 0)
    weights, bias = layers[-1]
    logits = a @ weights + bias
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    return probs / probs.sum(axis=1, keepdims=True)


class TestMlpSpec:
    def test_split_index_of_scaled_down_network(self):
        spec = MlpSpec(layer_sizes=[16, 32, 16, 4])
        assert spec.param_count == 16 * 32 + 32 + 32 * 16 + 16 + 16 * 4 + 4
        assert spec.split_index == spec.param_count - 68

    def test_rejects_single_class(self):
        with pytest.raises(ValueError):
            MlpSpec(layer_sizes=[4, 3, 1])

    def test_rejects_missing_hidden_layer(self):
        with pytest.raises(ValueError):
            MlpSpec(layer_sizes=[4, 3])


class TestParamVector:
    def test_split(self):
        embedding, decision = split_params(ParamVector([1.0, 2.0, 3.0], 2))
        np.testing.assert_array_equal(embedding, [1.0, 2.0])
        np.testing.assert_array_equal(decision, [3.0])

    def test_split_recomposes(self, small_spec, rng):
        params = init_params(small_spec, rng)
        embedding, decision = split_params(params)
        np.testing.assert_array_equal(np.concatenate([embedding, decision]), params.values)
        assert decision.size == 7 * 3 + 3

    def test_rejects_bad_split(self):
        with pytest.raises(ShapeError):
            ParamVector([1.0, 2.0], 3)

    def test_rejects_non_finite(self):
        with pytest.raises(NumericError):
            ParamVector([1.0, np.nan], 1)

    def test_values_are_read_only(self):
        params = ParamVector([1.0, 2.0], 1)
        with pytest.raises(ValueError):
            params.values[0] = 5.0


class TestForward:
    def test_zero_params_give_uniform_rows(self, small_spec, rng):
        params = ParamVector(np.zeros(small_spec.param_count), small_spec.split_index)
        probs = forward(small_spec, params, rng.normal(size=(6, 5)))
        np.testing.assert_allclose(probs, np.full((6, 3), 1 / 3), atol=1e-15)

    def test_matches_naive_oracle(self, rng):
        for activation in ("relu", "tanh"):
            spec = MlpSpec(layer_sizes=[4, 5, 3, 3], activation=activation)
            params = init_params(spec, rng)
            features = rng.normal(size=(7, 4))
            np.testing.assert_allclose(forward(spec, params, features),
                                       naive_forward(spec, params, features), atol=1e-10)

    def test_saturates_toward_modal_class(self):
        spec = MlpSpec(layer_sizes=[1, 1, 2], activation="relu")
        previous = 0.0
        for scale in (1.0, 10.0, 100.0):
            # hidden = relu(x), logit_0 = scale * hidden
            params = ParamVector([1.0, 0.0, scale, 0.0, 0.0, 0.0], spec.split_index)
            p = forward(spec, params, np.array([[1.0]]))[0, 0]
            assert p > previous
            previous = p
        assert previous > 1 - 1e-12

    def test_rejects_wrong_width(self, small_spec, rng):
        with pytest.raises(ShapeError):
            forward(small_spec, init_params(small_spec, rng), np.zeros((2, 4)))

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_rows_are_probability_vectors(self, seed):
        rng = np.random.default_rng(seed)
        spec = MlpSpec(layer_sizes=[3, 4, 5])
        probs = forward(spec, init_params(spec, rng), rng.normal(scale=10, size=(4, 3)))
        assert np.all(probs >= 0)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


class TestLossAndGrad:
    def test_uniform_loss(self):
        spec = MlpSpec(layer_sizes=[3, 2, 4])
        params = ParamVector(np.zeros(spec.param_count), spec.split_index)
        loss, _ = loss_and_grad(spec, params, Batch(np.ones((5, 3)), [0, 1, 2, 3, 0]))
        assert loss == pytest.approx(math.log(4), abs=1e-12)

    def test_duplicated_batch_is_identical(self, small_spec, rng):
        params = init_params(small_spec, rng)
        features = rng.normal(size=(6, 5))
        labels = rng.integers(0, 3, size=6)
        loss, grad = loss_and_grad(small_spec, params, Batch(features, labels))
        loss2, grad2 = loss_and_grad(small_spec, params,
                                     Batch(np.vstack([features, features]), np.concatenate([labels, labels])))
        assert loss2 == pytest.approx(loss, abs=1e-12)
        np.testing.assert_allclose(grad2.values, grad.values, atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        spec = MlpSpec(layer_sizes=[3, 4, 3], activation="tanh" if seed % 2 else "relu")
        params = init_params(spec, rng)
        batch = Batch(rng.normal(size=(5, 3)), rng.integers(0, 3, size=5))
        _, grad = loss_and_grad(spec, params, batch)

        step = 1e-5
        numeric = np.zeros(spec.param_count)
        for i in range(spec.param_count):
            plus, minus = params.values.copy(), params.values.copy()
            plus[i] += step
            minus[i] -= step
            numeric[i] = (loss_and_grad(spec, params.with_values(plus), batch)[0]
                          - loss_and_grad(spec, params.with_values(minus), batch)[0]) / (2 * step)
        scale = np.maximum(np.abs(numeric), np.abs(grad.values))
        relative = np.abs(numeric - grad.values) / np.maximum(scale, 1e-6)
        assert relative.max() < 1e-4

    @pytest.mark.parametrize("seed", range(50))
    def test_local_objective_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(500 + seed)
        spec = MlpSpec(layer_sizes=[3, int(rng.integers(2, 6)), 3], activation="tanh")
        params, center = init_params(spec, rng), init_params(spec, rng)
        global_embedding = init_params(spec, rng).embedding
        batch = Batch(rng.normal(size=(4, 3)), rng.integers(0, 3, size=4))
        mu, lam = float(rng.uniform(0, 2)), float(rng.uniform(0, 2))
        _, grad = local_objective(spec, params, batch, center, global_embedding, mu, lam)

        step = 1e-5
        numeric = np.zeros(spec.param_count)
        for i in range(spec.param_count):
            plus, minus = params.values.copy(), params.values.copy()
            plus[i] += step
            minus[i] -= step
            numeric[i] = (
                local_objective(spec, params.with_values(plus), batch, center, global_embedding, mu, lam)[0]
                - local_objective(spec, params.with_values(minus), batch, center, global_embedding, mu, lam)[0]
            ) / (2 * step)
        scale = np.maximum(np.abs(numeric), np.abs(grad.values))
        relative = np.abs(numeric - grad.values) / np.maximum(scale, 1e-6)
        assert relative.max() < 1e-4

    def test_rejects_out_of_range_labels(self, small_spec, rng):
        with pytest.raises(ShapeError):
            loss_and_grad(small_spec, init_params(small_spec, rng), Batch(np.zeros((1, 5)), [3]))

    def test_overflow_reports_layer(self):
        spec = MlpSpec(layer_sizes=[1, 1, 2], activation="relu")
        params = ParamVector([1e200, 0.0, 1e200, 0.0, 0.0, 0.0], spec.split_index)
        with pytest.raises(NumericError) as info:
            loss_and_grad(spec, params, Batch([[1e200]], [1]))
        assert info.value.layer is not None


class TestRegularizedStep:
    def test_pure_proximal_pull(self):
        step = regularized_step(vector([1.0], 0), vector([0.0], 0), vector([0.0], 0), np.zeros(0),
                                eta=0.1, mu=1.0, lam=0.0)
        np.testing.assert_allclose(step.values, [0.9])

    def test_plain_sgd(self):
        step = regularized_step(vector([1.0], 0), vector([2.0], 0), vector([0.0], 0), np.zeros(0),
                                eta=0.1, mu=0.0, lam=0.0)
        np.testing.assert_allclose(step.values, [0.8])

    def test_global_term_touches_only_embedding(self):
        params = ParamVector([1.0, 1.0, 1.0], 2)
        zero = ParamVector(np.zeros(3), 2)
        step = regularized_step(params, zero, params, np.zeros(2), eta=0.5, mu=0.0, lam=1.0)
        np.testing.assert_allclose(step.values, [0.5, 0.5, 1.0])

    def test_zero_learning_rate_is_identity(self, small_spec, rng):
        params = init_params(small_spec, rng)
        other = init_params(small_spec, rng)
        step = regularized_step(params, other, other, other.embedding, eta=0.0, mu=3.0, lam=2.0)
        np.testing.assert_array_equal(step.values, params.values)

    def test_rejects_mismatched_embedding(self, small_spec, rng):
        params = init_params(small_spec, rng)
        with pytest.raises(ShapeError):
            regularized_step(params, params, params, np.zeros(3), eta=0.1, mu=0.0, lam=0.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_step_decreases_local_objective(self, seed):
        rng = np.random.default_rng(100 + seed)
        spec = MlpSpec(layer_sizes=[4, 5, 3])
        params, center = init_params(spec, rng), init_params(spec, rng)
        global_embedding = init_params(spec, rng).embedding
        batch = Batch(rng.normal(size=(8, 4)), rng.integers(0, 3, size=8))
        mu, lam = float(rng.uniform(0.1, 2)), float(rng.uniform(0.1, 2))

        before, _ = local_objective(spec, params, batch, center, global_embedding, mu, lam)
        _, grad = loss_and_grad(spec, params, batch)
        stepped = regularized_step(params, grad, center, global_embedding, 1e-3, mu, lam)
        after, _ = local_objective(spec, stepped, batch, center, global_embedding, mu, lam)
        assert after < before

    def test_step_is_gradient_step_on_local_objective(self, small_spec, rng):
        params, center = init_params(small_spec, rng), init_params(small_spec, rng)
        global_embedding = init_params(small_spec, rng).embedding
        batch = Batch(rng.normal(size=(4, 5)), [0, 1, 2, 0])
        _, total = local_objective(small_spec, params, batch, center, global_embedding, 0.7, 0.3)
        _, grad = loss_and_grad(small_spec, params, batch)
        stepped = regularized_step(params, grad, center, global_embedding, 0.05, 0.7, 0.3)
        np.testing.assert_allclose(stepped.values, params.values - 0.05 * total.values, atol=1e-12)
