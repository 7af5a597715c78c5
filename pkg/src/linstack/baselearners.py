"""Small base classifiers that emit class-probability score blocks.

Every learner is an immutable spec with ``fit(X, y, n_classes)`` returning a
fitted model whose ``scores(X)`` gives an ``(I, N)`` array of rows that are
nonnegative and sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import smoothed_hinge
from .solver import minimize_composite


class EmptyClassError(ValueError):
    pass


def softmax(Z):
    Z = np.asarray(Z, dtype=float)
    E = np.exp(Z - Z.max(axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


def _check_xy(X, y, n_classes):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError(f"bad training data: X{X.shape}, y{y.shape}")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes})")
    return X, y


def _require_all_classes(y, n_classes, name):
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts == 0):
        raise EmptyClassError(
            f"{name}: class(es) {np.flatnonzero(counts == 0).tolist()} have no training instances"
        )
    return counts


class _Scaler:
    """Column z-scoring; constant columns are left unscaled."""

    def __init__(self, X):
        self.mean = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale = np.where(sd > 0, sd, 1.0)

    def __call__(self, X):
        return (X - self.mean) / self.scale


class _Fitted:
    n_features: int

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X


# --- nearest mean ----------------------------------------------------------------


@dataclass(frozen=True)
class NearestMean:
    standardize: bool = False

    kind = "nearest_mean"

    def fit(self, X, y, n_classes):
        X, y = _check_xy(X, y, n_classes)
        _require_all_classes(y, n_classes, "NearestMean")
        means = np.stack([X[y == c].mean(axis=0) for c in range(n_classes)])
        scale = _Scaler(X).scale if self.standardize else np.ones(X.shape[1])
        return NearestMeanModel(means, scale)


class NearestMeanModel(_Fitted):
    def __init__(self, means, scale):
        self.means = means
        self.scale = scale
        self.n_features = means.shape[1]

    def scores(self, X):
        X = self._check(X)
        D = (X[:, None, :] - self.means[None]) / self.scale
        return softmax(-np.sqrt((D**2).sum(axis=2)))


# --- Gaussian naive Bayes -----------------------------------------------------------


@dataclass(frozen=True)
class GaussianNB:
    var_floor: float = 1e-9

    kind = "gaussian_nb"

    def fit(self, X, y, n_classes):
        X, y = _check_xy(X, y, n_classes)
        counts = _require_all_classes(y, n_classes, "GaussianNB")
        means = np.stack([X[y == c].mean(axis=0) for c in range(n_classes)])
        var = np.stack([X[y == c].var(axis=0) for c in range(n_classes)])
        return GaussianNBModel(means, np.maximum(var, self.var_floor), counts / y.size)


class GaussianNBModel(_Fitted):
    def __init__(self, means, var, priors):
        self.means, self.var, self.priors = means, var, priors
        self.n_features = means.shape[1]

    def log_joint(self, X):
        X = self._check(X)
        ll = -0.5 * (
            np.log(2 * np.pi * self.var)[None] + (X[:, None, :] - self.means[None]) ** 2 / self.var[None]
        ).sum(axis=2)
        return ll + np.log(self.priors)[None]

    def scores(self, X):
        return softmax(self.log_joint(X))


# --- k nearest neighbours ------------------------------------------------------------


@dataclass(frozen=True)
class KNN:
    k: int = 3
    standardize: bool = False

    kind = "knn"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")

    def fit(self, X, y, n_classes):
        X, y = _check_xy(X, y, n_classes)
        if self.k > X.shape[0]:
            raise ValueError(f"k={self.k} exceeds the {X.shape[0]} training instances")
        scaler = _Scaler(X) if self.standardize else None
        return KNNModel(X, y, n_classes, self.k, scaler)


class KNNModel(_Fitted):
    def __init__(self, X, y, n_classes, k, scaler):
        self.scaler = scaler
        self.X = scaler(X) if scaler else X
        self.y, self.n_classes, self.k = y, n_classes, k
        self.n_features = X.shape[1]

    def neighbours(self, X):
        X = self._check(X)
        if self.scaler:
            X = self.scaler(X)
        d2 = ((X[:, None, :] - self.X[None]) ** 2).sum(axis=2)
        # stable sort: equal distances resolve to the lowest training index
        return np.argsort(d2, axis=1, kind="stable")[:, : self.k]

    def scores(self, X):
        nb = self.neighbours(X)
        counts = np.stack([np.bincount(self.y[row], minlength=self.n_classes) for row in nb])
        return (counts + 1.0) / (self.k + self.n_classes)


# --- linear models trained with the solver's machinery ------------------------------


class LinearModel(_Fitted):
    """Softmax over ``phi(X) @ W.T + b`` for a fixed feature map ``phi``."""

    def __init__(self, W, b, transform, n_features):
        self.W, self.b, self.transform = W, b, transform
        self.n_features = n_features

    def margins(self, X):
        return self.transform(self._check(X)) @ self.W.T + self.b

    def scores(self, X):
        return softmax(self.margins(X))


def _fit_linear(Z, y, n_classes, lam, loss, max_iters, tol):
    """Multiclass linear model on features ``Z`` with an l2 penalty on ``W``."""
    d = Z.shape[1]

    def evaluate(params, mu, want_grad):
        W, b = params
        R = Z @ W.T + b
        if loss == "logistic":
            P = softmax(R)
            idx = np.arange(y.size)
            exact = float(-np.log(np.maximum(P[idx, y], 1e-300)).mean())
            G = P
            G[idx, y] -= 1.0
            G /= y.size
            smooth = exact
        else:
            smooth, G, exact = smoothed_hinge(R, y, mu)
        pen = lam * float(np.vdot(W, W))
        grads = (G.T @ Z + 2.0 * lam * W, G.sum(axis=0)) if want_grad else None
        return smooth + pen, grads, exact + pen

    smoothing = (0.1, 1e-4, 4.0) if loss == "hinge" else None
    res = minimize_composite(
        evaluate,
        lambda p, s: p,
        (np.zeros((n_classes, d)), np.zeros(n_classes)),
        max_iters=max_iters,
        tol=tol,
        window=25,
        smoothing=smoothing,
    )
    return res.params


@dataclass(frozen=True)
class MultinomialLogistic:
    l2: float = 1e-2
    max_iters: int = 300
    tol: float = 1e-5

    kind = "logistic"

    def __post_init__(self):
        if self.l2 <= 0:
            raise ValueError("l2 strength must be positive")

    def fit(self, X, y, n_classes):
        X, y = _check_xy(X, y, n_classes)
        scaler = _Scaler(X)
        W, b = _fit_linear(scaler(X), y, n_classes, self.l2, "logistic", self.max_iters, self.tol)
        return LinearModel(W, b, scaler, X.shape[1])


class RandomFeatureMap:
    """``sqrt(2/D) cos(Omega x + beta)``, approximating an RBF kernel of given width."""

    def __init__(self, scaler, omega, phase):
        self.scaler, self.omega, self.phase = scaler, omega, phase

    def __call__(self, X):
        Z = self.scaler(X) @ self.omega.T + self.phase
        return np.sqrt(2.0 / self.omega.shape[0]) * np.cos(Z)


def median_distance(X, max_points=200):
    X = X[:max_points]
    d2 = ((X[:, None, :] - X[None]) ** 2).sum(axis=2)
    d = np.sqrt(d2[np.triu_indices(X.shape[0], k=1)])
    d = d[d > 0]
    return float(np.median(d)) if d.size else 1.0


@dataclass(frozen=True)
class RandomFeatureMargin:
    """Random cosine features plus a multiclass hinge-loss linear model.

    ``width`` is relative to the median pairwise distance of the
    standardized training data.
    """

    width: float = 1.0
    n_features: int = 100
    lam: float = 1e-3
    seed: int = 0
    max_iters: int = 300
    tol: float = 1e-5

    kind = "rff_margin"

    def __post_init__(self):
        if self.width <= 0 or self.n_features < 1 or self.lam <= 0:
            raise ValueError("width, n_features and lam must be positive")

    def feature_map(self, X) -> RandomFeatureMap:
        X = np.asarray(X, dtype=float)
        scaler = _Scaler(X)
        sigma = self.width * median_distance(scaler(X))
        rng = np.random.default_rng(self.seed)
        omega = rng.standard_normal((self.n_features, X.shape[1])) / sigma
        phase = rng.uniform(0.0, 2 * np.pi, self.n_features)
        return RandomFeatureMap(scaler, omega, phase)

    def fit(self, X, y, n_classes):
        X, y = _check_xy(X, y, n_classes)
        fmap = self.feature_map(X)
        W, b = _fit_linear(fmap(X), y, n_classes, self.lam, "hinge", self.max_iters, self.tol)
        return LinearModel(W, b, fmap, X.shape[1])


LEARNERS = {
    cls.kind: cls for cls in (NearestMean, GaussianNB, KNN, MultinomialLogistic, RandomFeatureMargin)
}


def train_base(spec, X, y, n_classes):
    return spec.fit(X, y, n_classes)


def score_base(model, x) -> np.ndarray:
    """Probability vector for one feature vector."""
    return model.scores(np.asarray(x, dtype=float)[None])[0]
