"""Linear discriminant analysis with diagonal shrinkage of the pooled covariance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingularCovariance
from .base import Standardizer, TrainedModel, softmax


def _cholesky(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance("pooled within-class covariance is singular") from exc


@dataclass
class LDAModel(TrainedModel):
    scaler: Standardizer = None  # centring only; drops constant dimensions
    means: np.ndarray = None  # [classes, d] in the reduced space
    chol: np.ndarray = None  # lower Cholesky factor of the pooled covariance
    basis: np.ndarray = None  # [d, classes - 1] discriminant directions

    kind = "lda"

    def _reduced(self, X):
        return self.scaler.transform(self._check(X))

    def discriminants(self, X) -> np.ndarray:
        Z = self._reduced(X)
        # Sigma^{-1} mu_c via two triangular solves
        inv_mu = np.linalg.solve(self.chol.T, np.linalg.solve(self.chol, self.means.T))
        return Z @ inv_mu - 0.5 * np.sum(self.means.T * inv_mu, axis=0)

    def predict_proba(self, X) -> np.ndarray:
        # equal priors
        return softmax(self.discriminants(X), axis=1)

    def project(self, X) -> np.ndarray:
        """Coordinates on the discriminant functions (for biplots)."""
        return self._reduced(X) @ self.basis

    def params(self):
        return {"scaler": self.scaler.to_params(), "means": self.means.tolist(),
                "chol": self.chol.tolist(), "basis": self.basis.tolist()}

    @classmethod
    def from_params(cls, header, params):
        return cls(**header, scaler=Standardizer.from_params(params["scaler"]),
                   means=np.asarray(params["means"], float),
                   chol=np.asarray(params["chol"], float),
                   basis=np.asarray(params["basis"], float))


def train_lda(train, shrinkage: float = 0.1, seed: int = 0) -> LDAModel:
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError("shrinkage must be in [0, 1]")
    n_classes = len(train.classes)
    if n_classes < 2:
        raise ValueError("LDA needs at least two classes")
    scaler = Standardizer.fit(train.X, scale=False)
    Z = scaler.transform(train.X)
    y = train.y
    means = np.vstack([Z[y == c].mean(axis=0) for c in range(n_classes)])
    resid = Z - means[y]
    dof = max(Z.shape[0] - n_classes, 1)
    within = resid.T @ resid / dof
    within = (1.0 - shrinkage) * within + shrinkage * np.diag(np.diag(within))
    L = _cholesky(within)
    # between-class scatter of the class means about the grand mean
    counts = np.bincount(y, minlength=n_classes).astype(float)
    centred = means - (counts @ means) / counts.sum()
    between = (centred.T * counts) @ centred / counts.sum()
    Linv_b = np.linalg.solve(L, between)
    M = np.linalg.solve(L, Linv_b.T).T
    M = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1][: n_classes - 1]
    basis = np.linalg.solve(L.T, vecs[:, order])
    basis /= np.linalg.norm(basis, axis=0)
    return LDAModel(tuple(train.classes), dict(train.feature_config), train.n_features, seed,
                    {"eigenvalues": vals[order].tolist()},
                    scaler=scaler, means=means, chol=L, basis=basis)
