import numpy as np
import pytest

from sonomap.errors import DivergenceError, ParameterError, SchemaError
from sonomap.models import MlpRegressor, gradient_check


def fit_only(hidden, X, Y, seed=0):
    """Initialise weights and normalisation without any training."""
    return MlpRegressor(hidden_layer_sizes=hidden, epochs=0, seed=seed).fit(X, Y)


class TestInit:
    def test_same_seed_identical(self):
        X, Y = np.random.default_rng(0).uniform(size=(5, 2)), np.zeros((5, 3))
        a = fit_only((4,), X, Y, seed=9)
        b = fit_only((4,), X, Y, seed=9)
        for wa, wb in zip(a.weights_, b.weights_):
            assert np.array_equal(wa, wb)

    def test_shapes(self):
        X, Y = np.zeros((3, 2)), np.zeros((3, 3))
        m = fit_only((4,), X, Y)
        assert m.weights_[0].shape == (2, 4)
        assert m.weights_[1].shape == (4, 3)

    def test_biases_zero_at_init(self):
        m = fit_only((4,), np.zeros((3, 2)), np.zeros((3, 3)))
        assert all(np.all(b == 0.0) for b in m.biases_)

    def test_bad_sizes(self):
        with pytest.raises(ParameterError):
            MlpRegressor(hidden_layer_sizes=(0,)).fit(np.zeros((2, 1)),
                                                      np.zeros((2, 1)))


class TestTraining:
    def test_linear_ramp(self):
        X = np.array([[0.0], [0.2], [0.8], [1.0]])
        Y = X.copy()
        m = MlpRegressor((4,), epochs=2000, learning_rate=0.5, seed=1).fit(X, Y)
        assert m.loss_curve_[-1] < 1e-3
        assert m.predict(np.array([0.5]))[0] == pytest.approx(0.5, abs=0.05)

    def test_xor_classic_oracle(self):
        X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
        Y = np.array([[0], [1], [1], [0]], dtype=float)
        m = MlpRegressor((8,), epochs=5000, learning_rate=0.5, seed=0).fit(X, Y)
        assert m.loss_curve_[-1] < 0.01

    def test_zero_extra_epochs_noop(self):
        X = np.array([[0.0], [1.0]])
        Y = np.array([[0.0], [1.0]])
        m = MlpRegressor((3,), epochs=50, seed=2).fit(X, Y)
        before = [w.copy() for w in m.weights_]
        m.train_more(X, Y, epochs=0)
        assert all(np.array_equal(a, b) for a, b in zip(before, m.weights_))

    def test_training_prediction_recovery(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(size=(4, 3))
        Y = rng.uniform(size=(4, 2))
        m = MlpRegressor((16,), epochs=4000, learning_rate=0.8, seed=3).fit(X, Y)
        span = Y.max(axis=0) - Y.min(axis=0)
        for x, y in zip(X, Y):
            assert np.all(np.abs(m.predict(x) - y) <= 0.05 * span + 1e-9)

    def test_identical_inputs_identical_outputs(self):
        X = np.array([[0.0, 1.0], [1.0, 0.0]])
        Y = np.array([[1.0], [0.0]])
        m = MlpRegressor((4,), epochs=100, seed=0).fit(X, Y)
        q = np.array([0.3, 0.7])
        assert np.array_equal(m.predict(q), m.predict(q))

    def test_output_dimension(self):
        X, Y = np.zeros((3, 2)), np.zeros((3, 5))
        m = fit_only((4,), X, Y)
        assert m.predict(np.zeros(2)).shape == (5,)

    def test_dimension_mismatch(self):
        m = fit_only((4,), np.zeros((3, 2)), np.zeros((3, 1)))
        with pytest.raises(SchemaError):
            m.predict(np.zeros(3))

    def test_divergence_names_epoch(self):
        X = np.array([[0.0], [1.0]])
        Y = np.array([[0.0], [1e3]])
        with pytest.raises(DivergenceError, match="epoch"):
            MlpRegressor((4,), epochs=5000, learning_rate=1e9, seed=0).fit(X, Y)

    def test_convex_loss_non_increasing(self):
        # no hidden layer: a linear model, so small-step GD is monotone
        rng = np.random.default_rng(8)
        X = rng.uniform(size=(10, 2))
        Y = X @ np.array([[1.0], [-2.0]]) + 0.5
        m = MlpRegressor((), epochs=300, learning_rate=0.05, seed=0).fit(X, Y)
        diffs = np.diff(m.loss_curve_)
        assert np.all(diffs <= 1e-12)


class TestGradientCheck:
    @pytest.mark.parametrize("seed", range(10))
    def test_random_352_network(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.uniform(size=(6, 3))
        Y = rng.uniform(size=(6, 2))
        m = fit_only((5,), X, Y, seed=seed)
        assert gradient_check(m, X, Y) < 1e-4

    def test_degenerate_zero_model(self):
        X = np.zeros((4, 3))
        Y = np.zeros((4, 2))
        m = fit_only((5,), X, Y)
        for W in m.weights_:
            W[:] = 0.0
        assert gradient_check(m, X, Y) < 1e-8

    def test_order_independence(self):
        # full-batch gradients do not depend on row order; the check's
        # verdict must hold for any permutation (the residual itself moves
        # at float-summation scale, orders of magnitude below the gate)
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(8, 3))
        Y = rng.uniform(size=(8, 2))
        m = fit_only((5,), X, Y, seed=1)
        perm = rng.permutation(8)
        g1, b1, _ = m._gradients(m._norm_in(X), m._norm_out(Y))
        g2, b2, _ = m._gradients(m._norm_in(X[perm]), m._norm_out(Y[perm]))
        for a, b in zip(g1 + b1, g2 + b2):
            assert np.allclose(a, b, atol=1e-12)
        assert gradient_check(m, X, Y) < 1e-4
        assert gradient_check(m, X[perm], Y[perm]) < 1e-4


class TestSerialization:
    def test_round_trip_predictions_exact(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(size=(5, 3))
        Y = rng.uniform(size=(5, 2))
        m = MlpRegressor((7,), epochs=200, seed=11).fit(X, Y)
        again = MlpRegressor.from_json(m.to_json())
        queries = rng.uniform(size=(50, 3))
        assert np.array_equal(m.predict(queries), again.predict(queries))

    def test_round_trip_bytes_stable(self):
        X = np.array([[0.0], [1.0]])
        Y = np.array([[0.5], [0.25]])
        m = MlpRegressor((3,), epochs=10, seed=0).fit(X, Y)
        text = m.to_json()
        assert MlpRegressor.from_json(text).to_json() == text

    def test_version_mismatch(self):
        X = np.array([[0.0], [1.0]])
        m = MlpRegressor((3,), epochs=1, seed=0).fit(X, X)
        doc = m.to_json().replace('"version": 1', '"version": 99')
        with pytest.raises(SchemaError, match="version"):
            MlpRegressor.from_json(doc)
