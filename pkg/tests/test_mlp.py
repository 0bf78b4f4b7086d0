import math
import warnings

import numpy as np
import pytest

from ids_adv import data, mlp
from ids_adv.errors import BadShape, Diverged, IoFailure, ShapeMismatch
from tests.conftest import logistic_model, zero_model


def fd_loss(model, X, y, h=1e-5):
    """Central-difference gradient of loss_bce(forward(X), y) w.r.t. X cells."""
    grad = np.zeros_like(X)
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            xp = X.copy()
            xp[i, j] += h
            xm = X.copy()
            xm[i, j] -= h
            grad[i, j] = (
                mlp.loss_bce(mlp.forward(model, xp), y) - mlp.loss_bce(mlp.forward(model, xm), y)
            ) / (2 * h)
    return grad


def fd_params(model, X, y, h=1e-5):
    """Central-difference gradients for every weight and bias."""
    gw, gb = [], []
    for li in range(model.n_layers):
        w = model.weights[li]
        g = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            orig = w[idx]
            w[idx] = orig + h
            lp = mlp.loss_bce(mlp.forward(model, X), y)
            w[idx] = orig - h
            lm = mlp.loss_bce(mlp.forward(model, X), y)
            w[idx] = orig
            g[idx] = (lp - lm) / (2 * h)
        gw.append(g)
        b = model.biases[li]
        g = np.zeros_like(b)
        for idx in np.ndindex(b.shape):
            orig = b[idx]
            b[idx] = orig + h
            lp = mlp.loss_bce(mlp.forward(model, X), y)
            b[idx] = orig - h
            lm = mlp.loss_bce(mlp.forward(model, X), y)
            b[idx] = orig
            g[idx] = (lp - lm) / (2 * h)
        gb.append(g)
    return gw, gb


def max_rel_err(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    return float(np.max(np.abs(a - b) / np.maximum.reduce([np.abs(a), np.abs(b), np.full_like(a, 1e-6)])))


def sample_away_from_kinks(rng, dims, n_rows, margin=1e-3):
    """Random model and inputs whose hidden pre-activations avoid relu kinks,
    so central differences stay on one linear piece."""
    while True:
        model = mlp.init(dims, seed=int(rng.integers(0, 2**31)))
        for w in model.weights:
            w += rng.normal(0, 0.3, w.shape)
        for b in model.biases:
            b += rng.normal(0, 0.3, b.shape)
        X = rng.uniform(0.05, 0.95, (n_rows, dims[0]))
        pre, _ = mlp._forward_cache(model, X)
        if all(np.abs(z).min() > margin for z in pre[:-1]):
            y = rng.integers(0, 2, n_rows).astype(np.float64)
            return model, X, y


class TestInit:
    def test_deterministic(self):
        a = mlp.init([4, 50, 30, 10, 1], seed=1)
        b = mlp.init([4, 50, 30, 10, 1], seed=1)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_single_layer_shape(self):
        m = mlp.init([4, 1], seed=1)
        assert m.weights[0].shape == (4, 1)
        assert m.biases[0].shape == (1,)

    def test_bad_shapes(self):
        with pytest.raises(BadShape):
            mlp.init([4, 50, 30, 10, 2], seed=1)
        with pytest.raises(BadShape):
            mlp.init([4], seed=1)
        with pytest.raises(BadShape):
            mlp.init([4, 0, 1], seed=1)


class TestForwardLogits:
    def test_zero_model_half(self):
        m = zero_model(3)
        p = mlp.forward(m, np.random.default_rng(0).uniform(0, 1, (5, 3)))
        assert np.allclose(p, 0.5)
        assert np.allclose(mlp.logits(m, np.zeros((2, 3))), 0.0)

    def test_orthogonal_input(self):
        m = logistic_model([1.0, 0.0])
        assert mlp.forward(m, [[0.0, 9.0]])[0] == pytest.approx(0.5)

    def test_closed_form_sigmoid(self):
        m = logistic_model([2.0])
        assert mlp.forward(m, [[1.0]])[0] == pytest.approx(0.8807970779778823, abs=1e-12)

    def test_logit_closed_form(self):
        m = logistic_model([3.0], b=-1.0)
        assert mlp.logits(m, [[1.0]])[0] == pytest.approx(2.0, abs=1e-12)

    def test_sigmoid_consistency(self):
        rng = np.random.default_rng(3)
        m = mlp.init([6, 8, 1], seed=4)
        X = rng.uniform(0, 1, (20, 6))
        z = mlp.logits(m, X)
        assert np.max(np.abs(1 / (1 + np.exp(-z)) - mlp.forward(m, X))) <= 1e-12

    def test_output_strictly_inside_unit_interval(self):
        m = logistic_model([1000.0])  # drives sigmoid to saturation
        p = mlp.forward(m, [[1.0], [0.0], [-0.0]])
        assert np.all(p > 0.0) and np.all(p < 1.0)

    def test_shape_mismatch(self):
        m = mlp.init([4, 1], seed=0)
        with pytest.raises(ShapeMismatch):
            mlp.forward(m, np.zeros((3, 5)))


class TestLoss:
    def test_perfect_prediction(self):
        assert mlp.loss_bce([1.0, 0.0], [1, 0]) <= 1e-10

    def test_half_everywhere(self):
        assert mlp.loss_bce([0.5, 0.5], [0, 1]) == pytest.approx(math.log(2), abs=1e-12)

    def test_confident_mistake(self):
        assert mlp.loss_bce([0.9], [0]) == pytest.approx(2.302585092994046, abs=1e-12)


class TestGradients:
    def test_params_match_finite_differences(self):
        rng = np.random.default_rng(11)
        model, X, y = sample_away_from_kinks(rng, [4, 5, 3, 1], 3)
        gw, gb = mlp.grad_params(model, X, y)
        fw, fb = fd_params(model, X, y)
        for a, b in zip(gw + gb, fw + fb):
            assert max_rel_err(a, b) < 1e-5

    def test_input_match_finite_differences(self):
        rng = np.random.default_rng(12)
        model, X, y = sample_away_from_kinks(rng, [4, 6, 1], 4)
        assert max_rel_err(mlp.grad_input(model, X, y), fd_loss(model, X, y)) < 1e-5

    def test_output_bias_gradient_closed_form(self):
        m = logistic_model([2.0, -1.0])
        X = np.array([[0.5, 0.5]])
        y = np.array([0.0])
        p = mlp.forward(m, X)[0]
        _, gb = mlp.grad_params(m, X, y)
        assert gb[-1][0] == pytest.approx(p - 0.0, abs=1e-12)

    def test_input_gradient_closed_form(self):
        # single logistic layer: dJ/dx = (p - y) * w
        m = logistic_model([2.0, -1.0])
        X = np.array([[0.5, 0.5]])
        p = 1 / (1 + math.exp(-(0.5 * 2.0 - 0.5 * 1.0)))
        g = mlp.grad_input(m, X, np.array([0.0]))
        assert g[0, 0] == pytest.approx(p * 2.0, abs=1e-12)
        assert g[0, 1] == pytest.approx(p * -1.0, abs=1e-12)

    def test_identical_rows_identical_gradients(self):
        m = mlp.init([5, 7, 1], seed=6)
        row = np.random.default_rng(7).uniform(0, 1, 5)
        X = np.vstack([row, row])
        g = mlp.grad_input(m, X, np.array([1.0, 1.0]))
        assert np.array_equal(g[0], g[1])

    def test_gradient_vanishes_at_saturated_fit(self):
        # one separable point driven to saturation: gradient norm ~ 0
        m = logistic_model([0.5])
        X, y = np.array([[1.0]]), np.array([1.0])
        cfg = mlp.TrainConfig(learning_rate=50.0, epochs=10, validation_split=0.5,
                              batch_size=1, optimizer="sgd", seed=0)
        trained, _ = mlp.train(m, data.Dataset(X, y.astype(np.int64), ["f1"]),  cfg,
                               validation=data.Dataset(X, y.astype(np.int64), ["f1"]))
        gw, gb = mlp.grad_params(trained, X, y)
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in gw + gb))
        assert norm < 1e-6


class TestJacobian:
    def test_rows_are_negations(self):
        m = mlp.init([4, 6, 1], seed=8)
        X = np.random.default_rng(9).uniform(0, 1, (5, 4))
        jac = mlp.jacobian(m, X)
        assert np.array_equal(jac[:, 0, :], -jac[:, 1, :])

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        model, X, _ = sample_away_from_kinks(rng, [3, 5, 1], 3)
        jac = mlp.jacobian(model, X)
        h = 1e-5
        fd = np.zeros((X.shape[0], X.shape[1]))
        for i in range(X.shape[0]):
            for j in range(X.shape[1]):
                xp, xm = X.copy(), X.copy()
                xp[i, j] += h
                xm[i, j] -= h
                # F1 is the raw class-1 probability
                fd[i, j] = (
                    1 / (1 + np.exp(-mlp.logits(model, xp[i : i + 1])[0]))
                    - 1 / (1 + np.exp(-mlp.logits(model, xm[i : i + 1])[0]))
                ) / (2 * h)
        assert max_rel_err(jac[:, 1, :], fd) < 1e-5

    def test_zero_model_zero_jacobian(self):
        m = zero_model(4)
        jac = mlp.jacobian(m, np.random.default_rng(1).uniform(0, 1, (3, 4)))
        assert np.all(jac == 0.0)


class TestTrain:
    def test_final_accuracy_on_separable_data(self, synth_splits, trained_model):
        train, _, _ = synth_splits
        p = mlp.forward(trained_model, train.X)
        assert float(np.mean((p >= 0.5) == (train.y == 1))) >= 0.97

    def test_zero_epochs_identity(self, synth_splits):
        train, val, _ = synth_splits
        model = mlp.init([10, 5, 1], seed=3)
        out, history = mlp.train(
            model, train, mlp.TrainConfig(epochs=0, seed=1), validation=val
        )
        assert history.train_loss == []
        for a, b in zip(out.weights, model.weights):
            assert np.array_equal(a, b)
        assert out is not model  # input never aliased

    def test_loss_decreases(self, synth_splits):
        train, val, _ = synth_splits
        model, history = mlp.train(
            mlp.init([10, 50, 30, 10, 1], seed=2),
            train,
            mlp.TrainConfig(learning_rate=0.003, epochs=6, batch_size=256, seed=12),
            validation=val,
        )
        assert history.train_loss[-1] < history.train_loss[0]
        assert len(history.val_accuracy) == 6

    def test_bitwise_deterministic(self, synth_splits):
        train, val, _ = synth_splits
        cfg = mlp.TrainConfig(learning_rate=0.01, epochs=3, batch_size=64, seed=5)
        a, _ = mlp.train(mlp.init([10, 8, 1], seed=4), train, cfg, validation=val)
        b, _ = mlp.train(mlp.init([10, 8, 1], seed=4), train, cfg, validation=val)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_input_model_not_mutated(self, synth_splits):
        train, val, _ = synth_splits
        model = mlp.init([10, 8, 1], seed=4)
        before = [w.copy() for w in model.weights]
        mlp.train(model, train, mlp.TrainConfig(epochs=2, seed=5), validation=val)
        for w, orig in zip(model.weights, before):
            assert np.array_equal(w, orig)

    def test_internal_validation_carve(self, synth_splits):
        train, _, _ = synth_splits
        _, history = mlp.train(
            mlp.init([10, 8, 1], seed=4),
            train,
            mlp.TrainConfig(epochs=2, validation_split=0.25, seed=5),
        )
        assert len(history.val_loss) == 2

    def test_sgd_optimizer(self, synth_splits):
        train, val, _ = synth_splits
        cfg = mlp.TrainConfig(learning_rate=0.5, epochs=10, batch_size=64,
                              optimizer="sgd", seed=5)
        model, history = mlp.train(mlp.init([10, 8, 1], seed=4), train, cfg, validation=val)
        assert history.train_accuracy[-1] > 0.9

    def test_diverged(self, synth_splits):
        train, val, _ = synth_splits
        cfg = mlp.TrainConfig(learning_rate=1e80, epochs=3, batch_size=64,
                              optimizer="sgd", seed=5)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            with pytest.raises(Diverged):
                mlp.train(mlp.init([10, 8, 8, 1], seed=4), train, cfg, validation=val)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            mlp.TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            mlp.TrainConfig(validation_split=1.0)
        with pytest.raises(ValueError):
            mlp.TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            mlp.TrainConfig(optimizer="rmsprop")


class TestPredict:
    def test_boundary_inclusive(self):
        m = zero_model(2)  # p = 0.5 exactly
        assert mlp.predict(m, [[0.3, 0.4]], threshold=0.5).tolist() == [1]

    def test_zero_threshold(self):
        m = logistic_model([1.0])
        assert mlp.predict(m, [[-5.0], [5.0]], threshold=0.0).tolist() == [1, 1]

    def test_threshold_validated(self):
        m = logistic_model([1.0])
        with pytest.raises(ValueError):
            mlp.predict(m, [[0.0]], threshold=1.5)
        with pytest.raises(ValueError):
            mlp.predict(m, [[0.0]], threshold=-0.1)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path, trained_model):
        path = tmp_path / "model.ckpt"
        mlp.save_model(trained_model, path)
        loaded = mlp.load_model(path)
        assert loaded.layer_dims == trained_model.layer_dims
        assert loaded.hidden_activation == "relu"
        assert loaded.output_activation == "sigmoid"
        for a, b in zip(loaded.weights, trained_model.weights):
            assert np.array_equal(a, b)
        for a, b in zip(loaded.biases, trained_model.biases):
            assert np.array_equal(a, b)
        # saving the loaded model reproduces the same bytes
        again = tmp_path / "model2.ckpt"
        mlp.save_model(loaded, again)
        assert path.read_bytes() == again.read_bytes()

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(IoFailure):
            mlp.load_model(path)
