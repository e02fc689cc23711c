"""Trained model base class, feature standardization and shared numerics."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import FeatureConfigMismatch, LengthMismatch

log = logging.getLogger(__name__)

# standard deviations at or below this are treated as constant features
_ZERO_STD = 1e-12


class SingularFeature(UserWarning):
    """Emitted when constant feature dimensions are dropped before training."""


def logsumexp(a, axis=-1):
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def softmax(a, axis=-1):
    a = np.asarray(a, dtype=np.float64)
    e = np.exp(a - np.max(a, axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class Standardizer:
    """Per-dimension z-scoring with constant dimensions removed."""

    mean: np.ndarray
    scale: np.ndarray
    keep: np.ndarray  # indices of retained input dimensions

    @classmethod
    def fit(cls, X, scale=True) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        std = X.std(axis=0)
        keep = np.flatnonzero(std > _ZERO_STD * np.maximum(1.0, np.abs(X.mean(axis=0))))
        dropped = X.shape[1] - keep.size
        if dropped:
            msg = f"dropping {dropped} zero-variance feature dimension(s)"
            log.warning(msg)
            warnings.warn(msg, SingularFeature, stacklevel=3)
        if keep.size == 0:
            raise ValueError("every feature dimension is constant")
        mean = X[:, keep].mean(axis=0)
        return cls(mean, std[keep] if scale else np.ones(keep.size), keep)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X[:, self.keep] - self.mean) / self.scale

    def to_params(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "keep": self.keep.tolist()}

    @classmethod
    def from_params(cls, d) -> "Standardizer":
        return cls(np.asarray(d["mean"], float), np.asarray(d["scale"], float),
                   np.asarray(d["keep"], dtype=np.int64))


@dataclass
class TrainedModel:
    """A fitted classifier plus the featurization it expects.

    Subclasses implement :meth:`predict_proba` and parameter
    (de)serialization; ``kind`` selects the subclass on load.
    """

    classes: tuple
    feature_config: dict
    n_features: int
    training_seed: int
    diagnostics: dict = field(default_factory=dict, repr=False, compare=False)

    kind = "abstract"

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise LengthMismatch(
                f"feature vectors have length {X.shape[1]}, model expects {self.n_features}"
            )
        return X

    def predict_proba(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X):
        """Class indices and the probability of each chosen class.

        Ties resolve to the earlier class in ``classes``.
        """
        P = self.predict_proba(X)
        idx = np.argmax(P, axis=1)
        return idx, P[np.arange(P.shape[0]), idx]

    def params(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_params(cls, header: dict, params: dict) -> "TrainedModel":
        raise NotImplementedError

    def header(self) -> dict:
        return {
            "classes": list(self.classes),
            "feature_config": dict(self.feature_config),
            "n_features": self.n_features,
            "training_seed": self.training_seed,
        }


def classify(model: TrainedModel, v, feature_config=None):
    """Label one feature vector: returns ``(class name, probability)``."""
    if feature_config is not None and dict(feature_config) != dict(model.feature_config):
        raise FeatureConfigMismatch("vector was featurized with different settings than the model")
    values = getattr(v, "values", v)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise LengthMismatch("classify expects a single vector")
    idx, prob = model.predict(values)
    return model.classes[int(idx[0])], float(prob[0])
