"""Principal component analysis of a labeled dataset."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooManyComponents


@dataclass
class PCAResult:
    mean: np.ndarray
    components: np.ndarray  # [n_components, n_features], orthonormal rows
    explained_variance_ratio: np.ndarray

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) @ self.components.T

    def inverse_transform(self, scores) -> np.ndarray:
        return np.asarray(scores) @ self.components + self.mean


def pca(ds, n_components: int) -> PCAResult:
    X = getattr(ds, "X", ds)
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if not 1 <= n_components <= min(n - 1, d):
        raise TooManyComponents(
            f"{n_components} components requested, at most {min(n - 1, d)} available"
        )
    mean = X.mean(axis=0)
    cov = np.cov(X - mean, rowvar=False).reshape(d, d)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:n_components]
    total = max(float(np.trace(cov)), np.finfo(float).tiny)
    ratio = np.clip(vals[order], 0.0, None) / total
    comps = vecs[:, order].T
    # deterministic sign: largest-magnitude loading positive
    flip = np.sign(comps[np.arange(n_components), np.argmax(np.abs(comps), axis=1)])
    comps *= np.where(flip == 0, 1.0, flip)[:, None]
    return PCAResult(mean, comps, ratio)
