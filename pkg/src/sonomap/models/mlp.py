"""Feed-forward network regression with full-batch backpropagation.

Hidden layers use the logistic sigmoid, the output layer is linear, and
inputs/targets are min-max normalised with the stats stored inside the
model so live prediction needs no external state. Training sets in this
workflow are tiny (a handful of examples), so plain full-batch gradient
descent keeps things deterministic.
"""

import base64
import json

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ..errors import DivergenceError, ParameterError, SchemaError
from ..validation import check_2d, check_paired

SERIAL_FORMAT = "sonomap-mlp"
SERIAL_VERSION = 1


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _encode(arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(arr.tobytes()).decode("ascii")}


def _decode(obj):
    arr = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f8")
    return arr.reshape(obj["shape"]).copy()


class MlpRegressor(BaseEstimator, RegressorMixin):
    """Maps feature vectors to synthesis-parameter vectors.

    Parameters
    ----------
    hidden_layer_sizes : sizes of the hidden layers, each >= 1
    epochs : full-batch gradient steps run by fit()
    learning_rate : step size on the mean-squared error
    seed : PRNG seed for weight initialisation (same seed, same model)
    """

    def __init__(self, hidden_layer_sizes=(16,), epochs=2000,
                 learning_rate=0.5, seed=0):
        self.hidden_layer_sizes = tuple(hidden_layer_sizes)
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed

    # -- construction ------------------------------------------------------

    def _init_weights(self, layer_sizes):
        if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
            raise ParameterError(f"bad layer sizes: {layer_sizes}")
        rng = np.random.default_rng(self.seed)
        self.layer_sizes_ = tuple(int(s) for s in layer_sizes)
        self.weights_ = []
        self.biases_ = []
        for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights_.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases_.append(np.zeros(fan_out))

    def _set_normalization(self, X, Y):
        self.in_min_ = X.min(axis=0)
        self.in_max_ = X.max(axis=0)
        self.out_min_ = Y.min(axis=0)
        self.out_max_ = Y.max(axis=0)

    def _norm_in(self, X):
        span = np.where(self.in_max_ > self.in_min_, self.in_max_ - self.in_min_, 1.0)
        return (X - self.in_min_) / span

    def _norm_out(self, Y):
        span = np.where(self.out_max_ > self.out_min_, self.out_max_ - self.out_min_, 1.0)
        return (Y - self.out_min_) / span

    def _denorm_out(self, Yn):
        span = np.where(self.out_max_ > self.out_min_, self.out_max_ - self.out_min_, 1.0)
        return Yn * span + self.out_min_

    # -- core passes -------------------------------------------------------

    def _forward(self, Xn):
        activations = [Xn]
        a = Xn
        last = len(self.weights_) - 1
        for i, (W, b) in enumerate(zip(self.weights_, self.biases_)):
            z = a @ W + b
            a = z if i == last else _sigmoid(z)
            activations.append(a)
        return activations

    def _gradients(self, Xn, Yn):
        """Backprop gradients of the MSE loss, plus the loss itself."""
        acts = self._forward(Xn)
        n, d_out = Yn.shape
        err = acts[-1] - Yn
        loss = float(np.mean(err**2))
        delta = 2.0 * err / (n * d_out)
        grads_w = [None] * len(self.weights_)
        grads_b = [None] * len(self.biases_)
        for i in range(len(self.weights_) - 1, -1, -1):
            grads_w[i] = acts[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                a = acts[i]
                delta = (delta @ self.weights_[i].T) * a * (1.0 - a)
        return grads_w, grads_b, loss

    # -- public API --------------------------------------------------------

    def fit(self, X, Y):
        """Train from scratch; normalisation stats come from this data."""
        X = check_2d(X, "X")
        Y = check_2d(Y, "Y")
        check_paired(X, Y)
        self._set_normalization(X, Y)
        self._init_weights((X.shape[1], *self.hidden_layer_sizes, Y.shape[1]))
        self.loss_curve_ = []
        self.train_more(X, Y, self.epochs)
        return self

    def train_more(self, X, Y, epochs, learning_rate=None):
        """Continue training with current weights and stored normalisation."""
        if epochs < 0:
            raise ParameterError("epochs must be >= 0")
        lr = self.learning_rate if learning_rate is None else learning_rate
        if lr <= 0:
            raise ParameterError("learning_rate must be > 0")
        X = check_2d(X, "X")
        Y = check_2d(Y, "Y")
        check_paired(X, Y)
        if X.shape[1] != self.layer_sizes_[0]:
            raise SchemaError(
                f"X has dimension {X.shape[1]}, model expects {self.layer_sizes_[0]}"
            )
        if Y.shape[1] != self.layer_sizes_[-1]:
            raise SchemaError(
                f"Y has dimension {Y.shape[1]}, model expects {self.layer_sizes_[-1]}"
            )
        Xn = self._norm_in(X)
        Yn = self._norm_out(Y)
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(epochs):
                grads_w, grads_b, loss = self._gradients(Xn, Yn)
                if not np.isfinite(loss):
                    raise DivergenceError(
                        f"training diverged at epoch {epoch}: loss={loss}",
                        epoch=epoch,
                    )
                for W, b, gw, gb in zip(self.weights_, self.biases_,
                                        grads_w, grads_b):
                    W -= lr * gw
                    b -= lr * gb
                self.loss_curve_.append(
                    float(np.mean((self._forward(Xn)[-1] - Yn) ** 2)))
        return self

    def predict(self, X):
        single = np.ndim(X) == 1
        if single:
            X = np.asarray(X, dtype=float).reshape(1, -1)
        X = check_2d(X, "X")
        if X.shape[1] != self.layer_sizes_[0]:
            raise SchemaError(
                f"input has dimension {X.shape[1]}, model expects {self.layer_sizes_[0]}"
            )
        out = self._denorm_out(self._forward(self._norm_in(X))[-1])
        return out[0] if single else out

    def loss(self, X, Y):
        """MSE in normalised target space."""
        X = check_2d(X, "X")
        Y = check_2d(Y, "Y")
        return float(np.mean((self._forward(self._norm_in(X))[-1] - self._norm_out(Y)) ** 2))

    # -- persistence -------------------------------------------------------

    def to_json(self):
        doc = {
            "format": SERIAL_FORMAT,
            "version": SERIAL_VERSION,
            "hidden_layer_sizes": list(self.hidden_layer_sizes),
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "layer_sizes": list(self.layer_sizes_),
            "weights": [_encode(W) for W in self.weights_],
            "biases": [_encode(b) for b in self.biases_],
            "in_min": _encode(self.in_min_),
            "in_max": _encode(self.in_max_),
            "out_min": _encode(self.out_min_),
            "out_max": _encode(self.out_max_),
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format") != SERIAL_FORMAT:
            raise SchemaError(f"not a {SERIAL_FORMAT} document")
        if doc.get("version") != SERIAL_VERSION:
            raise SchemaError(
                f"model version {doc.get('version')} unsupported "
                f"(expected {SERIAL_VERSION})"
            )
        model = cls(
            hidden_layer_sizes=tuple(doc["hidden_layer_sizes"]),
            epochs=doc["epochs"],
            learning_rate=doc["learning_rate"],
            seed=doc["seed"],
        )
        model.layer_sizes_ = tuple(doc["layer_sizes"])
        model.weights_ = [_decode(w) for w in doc["weights"]]
        model.biases_ = [_decode(b) for b in doc["biases"]]
        model.in_min_ = _decode(doc["in_min"])
        model.in_max_ = _decode(doc["in_max"])
        model.out_min_ = _decode(doc["out_min"])
        model.out_max_ = _decode(doc["out_max"])
        model.loss_curve_ = []
        return model


def gradient_check(model, X, Y, h=1e-5):
    """Max relative error between backprop and central finite differences.

    Walks every weight and bias entry; the finite-difference side is an
    independent oracle for the analytic gradients.
    """
    if h <= 0:
        raise ParameterError("h must be > 0")
    X = check_2d(X, "X")
    Y = check_2d(Y, "Y")
    Xn = model._norm_in(X)
    Yn = model._norm_out(Y)
    grads_w, grads_b, _ = model._gradients(Xn, Yn)

    def loss_at():
        return float(np.mean((model._forward(Xn)[-1] - Yn) ** 2))

    worst = 0.0
    for params, grads in ((model.weights_, grads_w), (model.biases_, grads_b)):
        for P, G in zip(params, grads):
            flat_p = P.reshape(-1)
            flat_g = G.reshape(-1)
            for i in range(flat_p.size):
                orig = flat_p[i]
                flat_p[i] = orig + h
                up = loss_at()
                flat_p[i] = orig - h
                down = loss_at()
                flat_p[i] = orig
                fd = (up - down) / (2.0 * h)
                bp = flat_g[i]
                rel = abs(bp - fd) / max(abs(bp), abs(fd), 1e-12)
                worst = max(worst, rel)
    return worst
