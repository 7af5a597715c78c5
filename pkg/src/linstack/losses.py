"""Losses, regularizers, subgradients and proximal operators for combiners."""

from __future__ import annotations

import enum

import numpy as np

from .core import CWS, WS, CombinerModel, LevelOneDataset


class LossKind(enum.Enum):
    HINGE = "hinge"
    LEAST_SQUARES = "ls"


class RegKind(enum.Enum):
    L2 = "l2"
    L1 = "l1"
    GROUP = "group"


class InvalidCombination(ValueError):
    pass


def _check_label(n, y):
    if n < 2:
        raise ValueError("at least two classes are needed for a margin loss")
    if not 0 <= y < n:
        raise ValueError(f"class index {y} out of range for N={n}")


def hinge_term(r, y: int) -> float:
    """``(1 - r[y] + max_{n != y} r[n])_+`` for one instance."""
    r = np.asarray(r, dtype=float)
    _check_label(r.size, y)
    other = np.delete(r, y).max()
    return max(0.0, 1.0 - r[y] + other)


def ls_term(r, y: int) -> float:
    r = np.asarray(r, dtype=float)
    _check_label(r.size, y)
    t = np.zeros_like(r)
    t[y] = 1.0
    return float(np.sum((r - t) ** 2))


def hinge_terms(R: np.ndarray, y: np.ndarray):
    """Per-row hinge values and the most offending wrong class.

    The offending class is the lowest-index maximizer among wrong classes.
    """
    idx = np.arange(R.shape[0])
    masked = R.copy()
    masked[idx, y] = -np.inf
    j = np.argmax(masked, axis=1)
    return np.maximum(0.0, 1.0 - R[idx, y] + R[idx, j]), j


def _one_hot(y, n):
    T = np.zeros((y.shape[0], n))
    T[np.arange(y.shape[0]), y] = 1.0
    return T


def loss_and_grad(R: np.ndarray, y: np.ndarray, loss: LossKind):
    """Mean loss over rows of combined scores ``R`` and a (sub)gradient in ``R``."""
    I, n = R.shape
    if n < 2:
        raise ValueError("at least two classes are needed for a margin loss")
    if LossKind(loss) is LossKind.HINGE:
        h, j = hinge_terms(R, y)
        G = np.zeros_like(R)
        act = np.flatnonzero(h > 0)
        G[act, j[act]] += 1.0
        G[act, y[act]] -= 1.0
        return h.mean(), G / I
    E = R - _one_hot(y, n)
    return np.sum(E**2) / I, 2.0 * E / I


def smoothed_hinge(R: np.ndarray, y: np.ndarray, mu: float, onehot=None):
    """Log-sum-exp smoothing of the mean hinge loss at temperature ``mu``.

    Returns ``(smoothed mean, gradient in R, exact mean hinge)``. The smoothed
    value overestimates the hinge by at most ``mu * log(N)`` per row.
    """
    I = R.shape[0]
    Y = _one_hot(y, R.shape[1]) if onehot is None else onehot
    Z = R + (1.0 - Y)
    zmax = Z.max(axis=1, keepdims=True)
    E = np.exp((Z - zmax) / mu)
    s = E.sum(axis=1, keepdims=True)
    ry = np.einsum("in,in->i", R, Y)
    exact = (zmax.sum() - ry.sum()) / I
    smooth = exact + mu * np.log(s).sum() / I
    return smooth, (E / s - Y) / I, exact


def risk(model: CombinerModel, data: LevelOneDataset, loss: LossKind) -> float:
    model.check(data.m_count, data.n_count)
    return loss_and_grad(model.scores(data.scores), data.labels, loss)[0]


def risk_subgradient(model: CombinerModel, data: LevelOneDataset, loss: LossKind):
    """A subgradient of the mean loss, returned as a model of the same variant."""
    model.check(data.m_count, data.n_count)
    _, G = loss_and_grad(model.scores(data.scores), data.labels, loss)
    return type(model).from_params(model.pullback(data.scores, G), model.n_count)


def group_norms(model: CombinerModel) -> np.ndarray:
    """One norm per classifier: ``|u_m|``, ``||V[m]||_2`` or ``||W_m||_F``."""
    if isinstance(model, WS):
        return np.abs(model.u)
    if isinstance(model, CWS):
        return np.linalg.norm(model.V, axis=1)
    n = model.n_count
    return np.sqrt((model.W.reshape(n, model.m_count, n) ** 2).sum(axis=(0, 2)))


def check_reg(model_or_type, kind: RegKind) -> None:
    cls = model_or_type if isinstance(model_or_type, type) else type(model_or_type)
    if RegKind(kind) is RegKind.GROUP and cls is WS:
        raise InvalidCombination(
            "group regularization is undefined for WS (groups are singletons); use L1"
        )


def reg_value(model: CombinerModel, kind: RegKind) -> float:
    kind = RegKind(kind)
    check_reg(model, kind)
    w = model.weights
    if kind is RegKind.L2:
        return float(np.sum(w**2))
    if kind is RegKind.L1:
        return float(np.sum(np.abs(w)))
    return float(group_norms(model).sum())


def soft_threshold(x, t):
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def group_shrink(x, t, axis):
    """Scale each group by ``max(1 - t / ||group||, 0)``; zero groups stay zero."""
    x = np.asarray(x, dtype=float)
    norms = np.sqrt(np.sum(x**2, axis=axis, keepdims=True))
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > t, 1.0 - t / norms, 0.0)
    return x * factor


def prox_weights(w: np.ndarray, kind: RegKind, t: float, model_type) -> np.ndarray:
    """Proximal map of ``t * R`` applied to a raw weight array."""
    if t < 0:
        raise ValueError(f"prox step must be nonnegative, got {t}")
    kind = RegKind(kind)
    check_reg(model_type, kind)
    if kind is RegKind.L2:
        raise ValueError("L2 is treated as a smooth term and has no prox here")
    if t == 0:
        return np.array(w, dtype=float)
    if kind is RegKind.L1:
        return soft_threshold(w, t)
    if model_type is CWS:
        return group_shrink(w, t, axis=1)
    n = w.shape[0]
    blocks = w.reshape(n, -1, n)
    return group_shrink(blocks, t, axis=(0, 2)).reshape(w.shape)


def prox(model: CombinerModel, kind: RegKind, t: float) -> CombinerModel:
    """Proximal map on the weights; the LSG bias is never shrunk."""
    return model.with_weights(prox_weights(model.weights, kind, t, type(model)))
