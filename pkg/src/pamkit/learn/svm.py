"""Binary linear SVM trained by averaged stochastic subgradient descent,
with Platt sigmoid calibration of the decision values."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NotBinary
from ..seeding import rng_for
from .base import Standardizer, TrainedModel

# initial SGD step; the schedule is eta0 / (1 + eta0 * lambda * t)
ETA0 = 0.1


def mean_hinge(w, b, X, y) -> float:
    return float(np.maximum(1.0 - y * (X @ w + b), 0.0).mean())


def svm_objective(w, b, X, y, lam) -> float:
    """``lam/2 |w|^2 + mean(max(0, 1 - y (Xw + b)))`` with ``y`` in {-1, +1}."""
    return 0.5 * lam * float(w @ w) + mean_hinge(w, b, X, y)


def sgd_hinge(X, y, lam, epochs, rng, eta0=ETA0):
    """Returns averaged ``(w, b)`` and per-epoch ``(objective, mean hinge)`` pairs."""
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    w_avg = np.zeros(d)
    b_avg = 0.0
    n_avg = 0
    t = 0
    history = []
    for epoch in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = eta0 / (1.0 + eta0 * lam * t)
            xi, yi = X[i], y[i]
            violated = yi * (xi @ w + b) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                w += eta * yi * xi
                b += eta * yi
            # iterate averaging starts after the first pass
            if epoch > 0:
                n_avg += 1
                w_avg += (w - w_avg) / n_avg
                b_avg += (b - b_avg) / n_avg
        cur_w, cur_b = (w_avg, b_avg) if n_avg else (w, b)
        history.append((svm_objective(cur_w, cur_b, X, y, lam), mean_hinge(cur_w, cur_b, X, y)))
    if n_avg:
        return w_avg.copy(), b_avg, history
    return w, b, history


def platt_fit(f, y, max_iter=100, min_step=1e-10, sigma=1e-12, eps=1e-5):
    """Fit ``P(y=+1 | f) = 1 / (1 + exp(A f + B))`` by Newton's method with
    backtracking, using Platt's smoothed targets."""
    f = np.asarray(f, dtype=np.float64)
    pos = y > 0
    n_pos = int(pos.sum())
    n_neg = f.size - n_pos
    t = np.where(pos, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def objective(a, b):
        z = a * f + b
        # t*z + log(1 + exp(-z)) written stably for either sign of z
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-np.abs(z))),
                                     (t - 1.0) * z + np.log1p(np.exp(-np.abs(z))))))

    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval = objective(A, B)
    for _ in range(max_iter):
        z = A * f + B
        p = np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA, newB = A + step * dA, B + step * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        else:
            break
    return float(A), float(B)


def sigmoid_prob(f, A, B) -> np.ndarray:
    z = A * np.asarray(f, dtype=np.float64) + B
    return np.where(z >= 0, np.exp(-z) / (1.0 + np.exp(-z)), 1.0 / (1.0 + np.exp(z)))


@dataclass
class SVMModel(TrainedModel):
    scaler: Standardizer = None
    w: np.ndarray = None
    b: float = 0.0
    platt_a: float = 0.0
    platt_b: float = 0.0

    kind = "svm"

    def decision_function(self, X) -> np.ndarray:
        """Signed margin; positive values favour ``classes[1]``."""
        return self.scaler.transform(self._check(X)) @ self.w + self.b

    def predict_proba(self, X) -> np.ndarray:
        p1 = sigmoid_prob(self.decision_function(X), self.platt_a, self.platt_b)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        # class[1] exactly when its calibrated probability reaches 0.5
        P = self.predict_proba(X)
        idx = (P[:, 1] >= 0.5).astype(np.int64)
        return idx, P[np.arange(P.shape[0]), idx]

    def params(self):
        return {"scaler": self.scaler.to_params(), "w": self.w.tolist(), "b": self.b,
                "platt_a": self.platt_a, "platt_b": self.platt_b}

    @classmethod
    def from_params(cls, header, params):
        return cls(**header, scaler=Standardizer.from_params(params["scaler"]),
                   w=np.asarray(params["w"], float), b=float(params["b"]),
                   platt_a=float(params["platt_a"]), platt_b=float(params["platt_b"]))


def train_svm(train, lam: float = 1e-4, epochs: int = 200, seed: int = 0,
              eta0: float = ETA0) -> SVMModel:
    if len(train.classes) != 2:
        raise NotBinary(f"linear SVM needs exactly 2 classes, got {len(train.classes)}")
    if lam <= 0:
        raise ValueError("regularization must be positive")
    scaler = Standardizer.fit(train.X)
    X = scaler.transform(train.X)
    y = np.where(train.y == 1, 1.0, -1.0)
    w, b, history = sgd_hinge(X, y, lam, epochs, rng_for(seed, "svm-sgd"), eta0)
    A, B = platt_fit(X @ w + b, y)
    dropped = sorted(set(range(train.n_features)) - set(scaler.keep.tolist()))
    return SVMModel(tuple(train.classes), dict(train.feature_config), train.n_features, seed,
                    {"objective_history": [h[0] for h in history],
                     "hinge_history": [h[1] for h in history], "dropped_dims": dropped},
                    scaler=scaler, w=w, b=float(b), platt_a=A, platt_b=B)
