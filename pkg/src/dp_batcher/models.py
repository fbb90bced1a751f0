"""Small dense models with hand-derived per-example gradients.

All parameters live in one flat vector so the training engine can treat
clipping, accumulation and noise uniformly.  Each model also exposes its dense
layers' per-example (activation, output-gradient) pairs, which is all that is
needed to compute per-example gradient norms without materializing the
gradients themselves.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class LinearRegression:
    """Squared-error linear model: loss = 0.5 * (w.x + c - y)^2."""

    classification = False

    def num_params(self, n_features: int) -> int:
        return n_features + 1

    def init_params(self, n_features: int, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(n_features + 1)

    def per_example_loss(self, theta: np.ndarray, x: np.ndarray, y: float) -> float:
        r = float(x @ theta[:-1] + theta[-1] - y)
        return 0.5 * r * r

    def per_example_grad(self, theta: np.ndarray, x: np.ndarray, y: float) -> np.ndarray:
        r = float(x @ theta[:-1] + theta[-1] - y)
        g = np.empty_like(theta)
        g[:-1] = r * x
        g[-1] = r
        return g

    def dense_layer_io(self, theta, x, y) -> list[tuple[np.ndarray, np.ndarray]]:
        r = float(x @ theta[:-1] + theta[-1] - y)
        return [(x, np.array([r]))]

    def decision_values(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        return features @ theta[:-1] + theta[-1]


class LogisticRegression:
    """Binary cross-entropy linear classifier; labels in {0, 1}."""

    classification = True

    def num_params(self, n_features: int) -> int:
        return n_features + 1

    def init_params(self, n_features: int, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(n_features + 1)

    def _logit(self, theta, x) -> float:
        return float(x @ theta[:-1] + theta[-1])

    def per_example_loss(self, theta, x, y) -> float:
        z = self._logit(theta, x)
        # log(1 + e^z) - y z, stable for both signs of z
        return float(np.logaddexp(0.0, z) - y * z)

    def per_example_grad(self, theta, x, y) -> np.ndarray:
        z = self._logit(theta, x)
        e = float(expit(z) - y)
        g = np.empty_like(theta)
        g[:-1] = e * x
        g[-1] = e
        return g

    def dense_layer_io(self, theta, x, y) -> list[tuple[np.ndarray, np.ndarray]]:
        e = float(expit(self._logit(theta, x)) - y)
        return [(x, np.array([e]))]

    def decision_values(self, theta, features) -> np.ndarray:
        return features @ theta[:-1] + theta[-1]


class TwoLayerClassifier:
    """tanh MLP with one hidden layer and a binary cross-entropy head.

    Flat parameter layout: [W1 (hidden x features, row-major), b1, w2, b2].
    """

    classification = True

    def __init__(self, hidden: int = 16):
        if hidden < 1:
            raise ValueError("hidden width must be >= 1")
        self.hidden = hidden

    def num_params(self, n_features: int) -> int:
        h = self.hidden
        return h * n_features + h + h + 1

    def init_params(self, n_features: int, rng: np.random.Generator) -> np.ndarray:
        h = self.hidden
        theta = np.zeros(self.num_params(n_features))
        w1 = rng.normal(0.0, 1.0 / np.sqrt(n_features), size=h * n_features)
        w2 = rng.normal(0.0, 1.0 / np.sqrt(h), size=h)
        theta[: h * n_features] = w1
        theta[h * n_features + h : h * n_features + 2 * h] = w2
        return theta

    def _unpack(self, theta: np.ndarray, n_features: int):
        h = self.hidden
        end_w1 = h * n_features
        w1 = theta[:end_w1].reshape(h, n_features)
        b1 = theta[end_w1 : end_w1 + h]
        w2 = theta[end_w1 + h : end_w1 + 2 * h]
        b2 = theta[end_w1 + 2 * h]
        return w1, b1, w2, b2

    def _forward(self, theta, x):
        w1, b1, w2, b2 = self._unpack(theta, x.shape[0])
        hidden_act = np.tanh(w1 @ x + b1)
        logit = float(w2 @ hidden_act + b2)
        return hidden_act, logit

    def per_example_loss(self, theta, x, y) -> float:
        _, z = self._forward(theta, x)
        return float(np.logaddexp(0.0, z) - y * z)

    def per_example_grad(self, theta, x, y) -> np.ndarray:
        n_features = x.shape[0]
        w1, b1, w2, b2 = self._unpack(theta, n_features)
        hidden_act = np.tanh(w1 @ x + b1)
        z = float(w2 @ hidden_act + b2)
        dz = float(expit(z) - y)
        dhidden = dz * w2
        dpre = dhidden * (1.0 - hidden_act * hidden_act)
        h = self.hidden
        g = np.empty_like(theta)
        g[: h * n_features] = np.outer(dpre, x).ravel()
        g[h * n_features : h * n_features + h] = dpre
        g[h * n_features + h : h * n_features + 2 * h] = dz * hidden_act
        g[-1] = dz
        return g

    def dense_layer_io(self, theta, x, y) -> list[tuple[np.ndarray, np.ndarray]]:
        w1, b1, w2, b2 = self._unpack(theta, x.shape[0])
        hidden_act = np.tanh(w1 @ x + b1)
        z = float(w2 @ hidden_act + b2)
        dz = float(expit(z) - y)
        dpre = dz * w2 * (1.0 - hidden_act * hidden_act)
        return [(x, dpre), (hidden_act, np.array([dz]))]

    def decision_values(self, theta, features) -> np.ndarray:
        n_features = features.shape[1]
        w1, b1, w2, b2 = self._unpack(theta, n_features)
        hidden_act = np.tanh(features @ w1.T + b1)
        return hidden_act @ w2 + b2


def build_model(name: str, hidden: int = 16):
    """Model factory used by the command line."""
    if name == "linear":
        return LinearRegression()
    if name == "logistic":
        return LogisticRegression()
    if name == "mlp":
        return TwoLayerClassifier(hidden=hidden)
    raise ValueError(f"unknown model {name!r}; expected linear, logistic or mlp")


MODEL_NAMES = ("linear", "logistic", "mlp")
