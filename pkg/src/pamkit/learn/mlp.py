"""Single-hidden-layer network: logistic hidden units, softmax output,
mean cross-entropy loss, full-batch gradient descent."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeding import rng_for
from .base import Standardizer, TrainedModel, softmax


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def init_params(n_in, hidden, n_out, rng) -> dict:
    return {
        "W1": rng.uniform(-0.5, 0.5, size=(n_in, hidden)),
        "b1": rng.uniform(-0.5, 0.5, size=hidden),
        "W2": rng.uniform(-0.5, 0.5, size=(hidden, n_out)),
        "b2": rng.uniform(-0.5, 0.5, size=n_out),
    }


def forward(params, X):
    H = _sigmoid(X @ params["W1"] + params["b1"])
    return H, softmax(H @ params["W2"] + params["b2"], axis=1)


def loss_and_grad(params, X, Y):
    """Mean cross-entropy and its gradient; ``Y`` is one-hot ``[n, classes]``."""
    n = X.shape[0]
    H, P = forward(params, X)
    loss = -float(np.sum(Y * np.log(np.maximum(P, 1e-300)))) / n
    dZ = (P - Y) / n
    dA = (dZ @ params["W2"].T) * H * (1.0 - H)
    grads = {
        "W2": H.T @ dZ,
        "b2": dZ.sum(axis=0),
        "W1": X.T @ dA,
        "b1": dA.sum(axis=0),
    }
    return loss, grads


@dataclass
class MLPModel(TrainedModel):
    scaler: Standardizer = None
    weights: dict = None

    kind = "mlp"

    def predict_proba(self, X) -> np.ndarray:
        return forward(self.weights, self.scaler.transform(self._check(X)))[1]

    def params(self):
        return {"scaler": self.scaler.to_params(),
                **{k: v.tolist() for k, v in self.weights.items()}}

    @classmethod
    def from_params(cls, header, params):
        weights = {k: np.asarray(params[k], float) for k in ("W1", "b1", "W2", "b2")}
        return cls(**header, scaler=Standardizer.from_params(params["scaler"]), weights=weights)


def train_mlp(train, hidden: int = 32, epochs: int = 2000, learning_rate: float = 0.5,
              seed: int = 0) -> MLPModel:
    if hidden < 1:
        raise ValueError("hidden width must be at least 1")
    scaler = Standardizer.fit(train.X)
    X = scaler.transform(train.X)
    Y = np.eye(len(train.classes))[train.y]
    params = init_params(X.shape[1], hidden, Y.shape[1], rng_for(seed, "mlp-init"))
    history = []
    for _ in range(epochs):
        loss, grads = loss_and_grad(params, X, Y)
        history.append(loss)
        for k in params:
            params[k] -= learning_rate * grads[k]
    return MLPModel(tuple(train.classes), dict(train.feature_config), train.n_features, seed,
                    {"loss_history": history}, scaler=scaler, weights=params)
