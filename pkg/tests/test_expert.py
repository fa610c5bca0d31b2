"""MLP numerics: forward identities, loss, gradients, training, persistence."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfexperts import data, expert
from rfexperts.errors import (
    FormatError,
    ParameterError,
    SchemaError,
    ShapeError,
    TrainingDivergedError,
)

from conftest import sigmoid, toy_level_dataset


def ladder_weights():
    """n=1 identity ladder: every layer passes its input through."""
    return expert.MlpWeights(
        W1=np.array([[1.0]]),
        b1=np.zeros(1),
        W2=np.array([[1.0]]),
        b2=np.zeros(1),
        W3=np.array([[1.0]]),
        b3=np.zeros(1),
    )


def random_weights(n, hidden, seed):
    rng = np.random.default_rng(seed)
    return expert.init_weights(n, hidden, rng)


class TestForward:
    def test_all_zero_parameters_give_half(self):
        weights = expert.MlpWeights(
            W1=np.zeros((3, 4)), b1=np.zeros(3), W2=np.zeros((2, 3)),
            b2=np.zeros(2), W3=np.zeros((1, 2)), b3=np.zeros(1),
        )
        assert expert.forward(weights, np.ones(4)) == 0.5

    def test_identity_ladder_matches_sigmoid(self):
        assert expert.forward(ladder_weights(), [2.0]) == pytest.approx(
            sigmoid(2.0), abs=1e-12
        )
        assert sigmoid(2.0) == pytest.approx(0.8807970779778823, abs=1e-12)

    def test_relu_dead_region_gives_half(self):
        assert expert.forward(ladder_weights(), [-2.0]) == 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            expert.forward(ladder_weights(), [1.0, 2.0])

    @given(
        st.integers(min_value=0, max_value=10**6),
        st.lists(st.floats(-50, 50), min_size=4, max_size=4),
    )
    @settings(max_examples=60, deadline=None)
    def test_output_always_inside_unit_interval(self, seed, h):
        weights = random_weights(4, (3, 3), seed)
        p = expert.forward(weights, h)
        assert 0.0 < p < 1.0


class TestBceLoss:
    def test_half_probability_is_ln2(self):
        assert expert.bce_loss([0.5], [1]) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_perfect_prediction_vanishes(self):
        assert expert.bce_loss([1.0 - 1e-12], [1]) == pytest.approx(0.0, abs=1e-9)

    def test_two_point_value(self):
        expected = -(math.log(0.9) + math.log(0.8)) / 2.0
        assert expected == pytest.approx(0.164252, abs=1e-6)
        assert expert.bce_loss([0.9, 0.2], [1, 0]) == pytest.approx(expected, abs=1e-12)

    def test_monotone_decreasing_for_positive_label(self):
        grid = np.linspace(0.05, 0.95, 19)
        losses = [expert.bce_loss([p], [1]) for p in grid]
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_nonnegative_and_clamped(self):
        assert expert.bce_loss([0.0, 1.0], [0, 1]) >= 0.0
        assert np.isfinite(expert.bce_loss([0.0], [1]))

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            expert.bce_loss([], [])


class TestGradient:
    def test_stationary_at_clamped_perfect_fit(self):
        weights = expert.MlpWeights(
            W1=np.array([[1.0]]), b1=np.zeros(1), W2=np.array([[1.0]]),
            b2=np.zeros(1), W3=np.array([[100.0]]), b3=np.zeros(1),
        )
        X = np.array([[1.0]])
        grads = expert.gradient(weights, X, np.array([1.0]))
        norm = sum(float(np.abs(getattr(grads, f)).sum())
                   for f in ("W1", "b1", "W2", "b2", "W3", "b3"))
        assert norm < 1e-6

    def test_matches_central_finite_differences(self):
        step = 1e-5
        rng = np.random.default_rng(0)
        for trial in range(5):
            weights = random_weights(4, (3, 3), 100 + trial)
            X = rng.uniform(0.1, 2.0, size=(2, 4))
            y = rng.integers(0, 2, size=2).astype(float)
            grads = expert.gradient(weights, X, y)
            arrays = {f: getattr(weights, f).copy()
                      for f in ("W1", "b1", "W2", "b2", "W3", "b3")}
            for field_name, arr in arrays.items():
                grad_arr = getattr(grads, field_name)
                for index in np.ndindex(arr.shape):
                    def loss_at(value):
                        patched = {k: v.copy() for k, v in arrays.items()}
                        patched[field_name][index] = value
                        w = expert.MlpWeights(**patched)
                        return expert.bce_loss(expert.forward_batch(w, X), y)
                    numeric = (
                        loss_at(arr[index] + step) - loss_at(arr[index] - step)
                    ) / (2 * step)
                    analytic = grad_arr[index]
                    scale = max(abs(numeric), abs(analytic), 1e-8)
                    assert abs(numeric - analytic) / scale <= 1e-4

    def test_duplicated_batch_same_gradient(self):
        weights = random_weights(4, (3, 3), 7)
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(3, 4))
        y = np.array([1.0, 0.0, 1.0])
        single = expert.gradient(weights, X, y)
        doubled = expert.gradient(
            weights, np.vstack([X, X]), np.concatenate([y, y])
        )
        for field_name in ("W1", "b1", "W2", "b2", "W3", "b3"):
            assert np.allclose(
                getattr(single, field_name), getattr(doubled, field_name),
                rtol=1e-12, atol=1e-12,
            )

    def test_empty_batch_rejected(self):
        with pytest.raises(ParameterError):
            expert.gradient(ladder_weights(), np.empty((0, 1)), np.empty(0))


class TestTraining:
    def test_separable_toy_set_reaches_perfect_accuracy(self):
        dataset = toy_level_dataset(120)
        train_set, test_set = data.split(dataset, 0.25, seed=1)
        config = expert.TrainConfig(
            epochs=200, learning_rate=0.05, batch_size=16,
            hidden_sizes=(8, 4), seed=2,
        )
        weights, history = expert.train(config, train_set, test_set)
        accuracy, _ = expert.evaluate(weights, test_set)
        assert accuracy == 1.0
        assert len(history.train_loss) == len(history.test_accuracy) <= 200

    def test_zero_epochs_forbidden(self):
        with pytest.raises(ParameterError):
            expert.TrainConfig(epochs=0)

    def test_training_is_deterministic(self):
        dataset = toy_level_dataset(60)
        train_set, test_set = data.split(dataset, 0.25, seed=1)
        config = expert.TrainConfig(
            epochs=30, learning_rate=0.05, batch_size=16,
            hidden_sizes=(6, 3), seed=11,
        )
        first_w, first_h = expert.train(config, train_set, test_set)
        second_w, second_h = expert.train(config, train_set, test_set)
        for field_name in ("W1", "b1", "W2", "b2", "W3", "b3"):
            assert np.array_equal(
                getattr(first_w, field_name), getattr(second_w, field_name)
            )
        assert first_h.train_loss == second_h.train_loss
        assert first_h.test_accuracy == second_h.test_accuracy

    def test_divergence_reports_last_finite_epoch(self):
        dataset = toy_level_dataset(40)
        train_set, test_set = data.split(dataset, 0.25, seed=1)
        config = expert.TrainConfig(
            epochs=50, learning_rate=1e300, batch_size=8,
            hidden_sizes=(4, 2), seed=0,
        )
        with pytest.raises(TrainingDivergedError) as excinfo:
            expert.train(config, train_set, test_set)
        assert excinfo.value.last_epoch >= 0

    def test_early_stop_honors_patience(self):
        dataset = toy_level_dataset(80)
        train_set, test_set = data.split(dataset, 0.25, seed=1)
        config = expert.TrainConfig(
            epochs=500, learning_rate=0.05, batch_size=16,
            hidden_sizes=(8, 4), seed=2, early_stop_patience=10,
        )
        _, history = expert.train(config, train_set, test_set)
        assert len(history.train_loss) < 500


class TestEvaluate:
    def test_threshold_zero_predicts_all_positive(self):
        dataset = toy_level_dataset(20)
        weights = random_weights(8, (4, 2), 3)
        accuracy, preds = expert.evaluate(weights, dataset, threshold=0.0)
        assert preds.tolist() == [1] * 20
        assert accuracy == dataset.positive_fraction

    def test_empty_dataset_rejected(self):
        empty = data.AttributeDataset(attribute_id="detect_los", examples=())
        with pytest.raises(ParameterError):
            expert.evaluate(random_weights(8, (4, 2), 3), empty)


class TestWeightPersistence:
    def test_round_trip_preserves_forward(self, tmp_path):
        weights = random_weights(6, (5, 3), 42)
        path = tmp_path / "w.json"
        expert.save_weights(weights, path)
        loaded = expert.load_weights(path)
        rng = np.random.default_rng(0)
        for _ in range(10):
            h = rng.uniform(size=6)
            assert expert.forward(weights, h) == expert.forward(loaded, h)
        for field_name in ("W1", "b1", "W2", "b2", "W3", "b3"):
            assert np.array_equal(
                getattr(weights, field_name), getattr(loaded, field_name)
            )

    def test_wrong_w2_shape_is_schema_error(self, tmp_path):
        weights = random_weights(6, (5, 3), 42)
        path = tmp_path / "w.json"
        expert.save_weights(weights, path)
        doc = json.loads(path.read_text())
        doc["W2"] = [row[:-1] for row in doc["W2"]]
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError):
            expert.load_weights(path)

    def test_missing_b3_is_format_error(self, tmp_path):
        weights = random_weights(6, (5, 3), 42)
        path = tmp_path / "w.json"
        expert.save_weights(weights, path)
        doc = json.loads(path.read_text())
        del doc["b3"]
        path.write_text(json.dumps(doc))
        with pytest.raises(FormatError):
            expert.load_weights(path)


class TestHistoryHelpers:
    def test_moving_average_warmup_and_window(self):
        values = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        smoothed = expert.moving_average(values, window=3)
        assert smoothed == [0.0, 0.5, 1.0, 2.0, 3.0, 4.0]

    def test_history_smoothing_preserves_length(self):
        history = expert.TrainHistory(
            train_loss=list(np.linspace(1.0, 0.1, 120)),
            test_accuracy=list(np.linspace(0.5, 0.99, 120)),
        )
        smoothed = history.smoothed(window=50)
        assert len(smoothed.train_loss) == 120
        assert len(smoothed.test_accuracy) == 120
