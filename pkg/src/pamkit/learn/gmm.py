"""Per-class diagonal-covariance Gaussian mixtures fitted by EM."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ClassTooSmall, DegenerateClass
from ..seeding import rng_for
from .base import TrainedModel, logsumexp, softmax

VAR_FLOOR = 1e-6
TOL = 1e-6
MAX_ITER = 200
KMEANS_ITER = 50

_LOG_2PI = np.log(2.0 * np.pi)


def component_log_density(X, means, variances) -> np.ndarray:
    """``log N(x | mean_k, diag(var_k))`` for every row and component, ``[n, k]``."""
    X = np.asarray(X, dtype=np.float64)
    quad = np.column_stack([((X - m) ** 2 / v).sum(axis=1) for m, v in zip(means, variances)])
    logdet = np.sum(np.log(variances), axis=1)
    return -0.5 * (X.shape[1] * _LOG_2PI + logdet + quad)


def kmeans(X, k, rng, n_iter=KMEANS_ITER):
    """Lloyd's algorithm from ``k`` distinct random rows; returns labels."""
    distinct = np.unique(X, axis=0)
    if distinct.shape[0] < k:
        raise DegenerateClass(f"{distinct.shape[0]} distinct vector(s) cannot seed {k} components")
    centers = distinct[rng.choice(distinct.shape[0], size=k, replace=False)]
    labels = None
    for _ in range(n_iter):
        d = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = X[labels == j]
            if members.shape[0]:
                centers[j] = members.mean(axis=0)
    return labels


def _m_step(X, resp, means, variances, var_floor):
    nk = resp.sum(axis=0)
    weights = nk / X.shape[0]
    live = nk > 0
    means = means.copy()
    variances = variances.copy()
    for j in np.flatnonzero(live):
        r = resp[:, j]
        means[j] = r @ X / nk[j]
        variances[j] = np.maximum(r @ (X - means[j]) ** 2 / nk[j], var_floor)
    return weights, means, variances


def fit_diag_gmm(X, k, rng, tol=TOL, max_iter=MAX_ITER, var_floor=VAR_FLOOR):
    """EM for one mixture.

    Returns ``(weights, means, variances, loglik_history)`` where
    ``loglik_history[i]`` is the total log-likelihood of the parameters after
    ``i`` M-steps (entry 0 is the k-means initialisation).
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < k:
        raise ClassTooSmall(f"{n} sample(s) cannot fit {k} components")
    if k > 1 and np.all(X == X[0]):
        raise DegenerateClass("all vectors are identical; use a single component")
    labels = np.zeros(n, dtype=np.int64) if k == 1 else kmeans(X, k, rng)
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    weights, means, variances = _m_step(X, resp, np.zeros((k, d)), np.ones((k, d)), var_floor)
    history = []
    for _ in range(max_iter + 1):
        with np.errstate(divide="ignore"):
            joint = component_log_density(X, means, variances) + np.log(weights)
        norm = logsumexp(joint, axis=1)
        history.append(float(norm.sum()))
        if len(history) > 1 and history[-1] - history[-2] < tol:
            break
        if len(history) > max_iter:
            break
        resp = np.exp(joint - norm[:, None])
        weights, means, variances = _m_step(X, resp, means, variances, var_floor)
    return weights, means, variances, history


def mixture_loglik(X, weights, means, variances) -> np.ndarray:
    with np.errstate(divide="ignore"):
        joint = component_log_density(X, means, variances) + np.log(weights)
    return logsumexp(joint, axis=1)


@dataclass
class GMMModel(TrainedModel):
    components: list = None  # per class: (weights [k], means [k, d], variances [k, d])

    kind = "gmm"

    def class_loglik(self, X) -> np.ndarray:
        X = self._check(X)
        return np.column_stack([mixture_loglik(X, *c) for c in self.components])

    def predict_proba(self, X) -> np.ndarray:
        # equal class priors
        return softmax(self.class_loglik(X), axis=1)

    def params(self) -> dict:
        return {"components": [
            {"weights": w.tolist(), "means": m.tolist(), "variances": v.tolist()}
            for w, m, v in self.components
        ]}

    @classmethod
    def from_params(cls, header, params):
        comps = [(np.asarray(c["weights"], float), np.asarray(c["means"], float),
                  np.asarray(c["variances"], float)) for c in params["components"]]
        return cls(**header, components=comps)


def train_gmm(train, k_components=2, seed: int = 0, tol=TOL, max_iter=MAX_ITER,
              var_floor=VAR_FLOOR) -> GMMModel:
    """One mixture per class; ``k_components`` is an int or a ``{class: k}`` mapping."""
    comps, histories = [], {}
    for cls in train.classes:
        k = k_components[cls] if isinstance(k_components, dict) else int(k_components)
        X = train.X[np.asarray(train.labels, dtype=object) == cls]
        w, m, v, hist = fit_diag_gmm(X, k, rng_for(seed, f"gmm-init:{cls}"), tol, max_iter, var_floor)
        comps.append((w, m, v))
        histories[cls] = hist
    return GMMModel(tuple(train.classes), dict(train.feature_config), train.n_features, seed,
                    {"loglik_history": histories}, components=comps)
