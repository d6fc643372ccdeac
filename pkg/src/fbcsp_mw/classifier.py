"""Gaussian naive Bayes evaluated in log space."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

VARIANCE_FLOOR_RTOL = 1e-12
VARIANCE_FLOOR_MIN = 1e-300


class SingleClassError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianNbModel:
    classes: np.ndarray      # (k,) ascending
    class_priors: np.ndarray  # (k,)
    means: np.ndarray        # (k, n)
    variances: np.ndarray    # (k, n)
    variance_floor: float

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def _active(self) -> np.ndarray:
        # features with identical parameters in every class cancel out of the posterior
        same = np.all(self.means == self.means[0], axis=0) & \
            np.all(self.variances == self.variances[0], axis=0)
        return ~same

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        act = self._active()
        mu = self.means[:, act]
        var = self.variances[:, act]
        x = X[:, None, act]
        ll = -0.5 * (np.log(2 * np.pi * var) + (x - mu) ** 2 / var).sum(axis=-1)
        return ll + np.log(self.class_priors)

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        post = np.exp(jll - logsumexp(jll, axis=1, keepdims=True))
        return post / post.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        # argmax takes the first maximum, i.e. the lower class id on ties
        return self.classes[np.argmax(self.joint_log_likelihood(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "classes": self.classes.tolist(),
            "class_priors": self.class_priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "variance_floor": float(self.variance_floor),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianNbModel":
        return cls(np.asarray(d["classes"]), np.asarray(d["class_priors"], dtype=float),
                   np.asarray(d["means"], dtype=float).reshape(len(d["classes"]), -1),
                   np.asarray(d["variances"], dtype=float).reshape(len(d["classes"]), -1),
                   float(d["variance_floor"]))


def fit(features, labels) -> GaussianNbModel:
    """Empirical priors, per-class means and population variances.

    Variances are floored at ``1e-12`` times the mean feature variance.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if X.shape[1] < 1:
        raise ValueError("need at least one feature")
    classes = np.unique(y)
    if classes.size < 2:
        raise SingleClassError(f"only class {classes.tolist()} present")
    floor = max(VARIANCE_FLOOR_RTOL * float(X.var(axis=0).mean()), VARIANCE_FLOOR_MIN)
    priors = np.array([np.mean(y == c) for c in classes])
    means = np.stack([X[y == c].mean(axis=0) for c in classes])
    variances = np.stack([X[y == c].var(axis=0) for c in classes])
    return GaussianNbModel(classes, priors, means, np.maximum(variances, floor), floor)


def predict_proba(model: GaussianNbModel, x) -> np.ndarray:
    """Posterior per class; a 1-D ``x`` gives a 1-D result."""
    p = model.predict_proba(x)
    return p[0] if np.ndim(x) == 1 else p


def predict(model: GaussianNbModel, x):
    y = model.predict(x)
    return y[0] if np.ndim(x) == 1 else y
