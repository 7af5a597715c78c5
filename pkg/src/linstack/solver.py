"""Regularized risk minimization for combiner weights and lambda selection.

The default optimizer is an accelerated proximal gradient method applied to
a log-sum-exp smoothing of the hinge loss. The smoothing temperature is
lowered whenever progress on the *exact* objective stalls, and the iterate
with the best exact objective is returned. Least-squares losses are smooth
already and skip the continuation. ``method="subgradient"`` selects a plain
proximal subgradient method with ``step0 / sqrt(t)`` steps instead.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .core import (
    MODEL_TYPES,
    Combiner,
    CombinerModel,
    LevelOneDataset,
    predict_many,
    zero_model,
)
from .losses import (
    LossKind,
    RegKind,
    check_reg,
    loss_and_grad,
    prox_weights,
    reg_value,
    smoothed_hinge,
)
from .splits import require_per_class, stratified_folds

DEFAULT_GRID = (1e-11, 1e-9, 1e-7, 1e-5, 1e-3, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 10.0)


@dataclass(frozen=True)
class TrainConfig:
    combiner: Combiner = Combiner.CWS
    loss: LossKind = LossKind.HINGE
    reg: RegKind = RegKind.L2
    lam: float = 0.01
    max_iters: int = 2000
    step0: float = 1.0
    tol: float = 1e-7
    window: int = 50
    seed: int = 0
    method: str = "apg"
    smoothing: float = 0.1
    smoothing_min: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "combiner", Combiner(self.combiner))
        object.__setattr__(self, "loss", LossKind(self.loss))
        object.__setattr__(self, "reg", RegKind(self.reg))
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.max_iters < 1 or self.window < 1:
            raise ValueError("max_iters and window must be >= 1")
        if not (self.tol > 0 and self.step0 > 0):
            raise ValueError("tol and step0 must be positive")
        if self.method not in ("apg", "subgradient"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.smoothing_min <= self.smoothing:
            raise ValueError("need 0 < smoothing_min <= smoothing")
        check_reg(MODEL_TYPES[self.combiner], self.reg)

    @property
    def model_type(self):
        return MODEL_TYPES[self.combiner]

    def with_lambda(self, lam: float) -> "TrainConfig":
        return dataclasses.replace(self, lam=float(lam))


class TrainResult(NamedTuple):
    model: CombinerModel
    trace: tuple  # running best exact objective, one entry per iteration plus the start


class LambdaSearchResult(NamedTuple):
    best_lambda: float
    accuracies: tuple  # mean inner-CV accuracy, aligned with the grid


def objective(model: CombinerModel, data: LevelOneDataset, config: TrainConfig) -> float:
    if not isinstance(model, config.model_type):
        raise TypeError(
            f"{type(model).__name__} model does not match combiner {config.combiner.name}"
        )
    model.check(data.m_count, data.n_count)
    risk = loss_and_grad(model.scores(data.scores), data.labels, config.loss)[0]
    return risk + config.lam * reg_value(model, config.reg)


# --- generic composite minimization -------------------------------------------------


class _Result(NamedTuple):
    params: tuple
    trace: list


def _axpy(a, xs, ys):
    return tuple(x + a * y for x, y in zip(xs, ys))


def minimize_composite(
    evaluate: Callable,
    prox: Callable,
    x0: Sequence[np.ndarray],
    *,
    max_iters: int,
    tol: float,
    window: int,
    step0: float = 1.0,
    smoothing: tuple | None = None,
) -> _Result:
    """Accelerated proximal gradient with backtracking and best-iterate tracking.

    ``evaluate(x, mu, want_grad)`` returns ``(smooth_value, grads, exact_value)``
    where ``smooth_value`` is the differentiable part (possibly smoothed at
    temperature ``mu``) and ``exact_value`` the full nonsmooth objective.
    ``prox(x, step)`` applies the proximal map of ``step`` times the nonsmooth
    part. ``smoothing`` is ``(mu0, mu_min, factor)`` or ``None``.
    """
    mu, mu_min, factor = smoothing if smoothing else (0.0, 0.0, 1.0)
    x = tuple(np.array(a, dtype=float) for a in x0)
    best_x = x
    best = evaluate(x, mu, False)[2]
    trace = [best]
    z, t_k, L = x, 1.0, 1.0 / step0
    ref = best
    for it in range(1, max_iters + 1):
        fz, gz, _ = evaluate(z, mu, True)
        L *= 0.9
        while True:
            x_new = prox(_axpy(-1.0 / L, z, gz), 1.0 / L)
            d = tuple(a - b for a, b in zip(x_new, z))
            fx, _, exact = evaluate(x_new, mu, False)
            lin = sum(float(np.vdot(g, e)) for g, e in zip(gz, d))
            sq = sum(float(np.vdot(e, e)) for e in d)
            if fx <= fz + lin + 0.5 * L * sq + 1e-12 * abs(fz) or L > 1e12:
                break
            L *= 2.0
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_k * t_k))
        z = _axpy((t_k - 1.0) / t_next, x_new, tuple(a - b for a, b in zip(x_new, x)))
        x, t_k = x_new, t_next
        if exact < best:
            best, best_x = exact, x
        trace.append(best)
        if it % window == 0:
            if ref - best <= tol * abs(ref) or best == 0.0:
                if smoothing and mu > mu_min:
                    mu = max(mu / factor, mu_min)
                    x = z = best_x
                    t_k = 1.0
                else:
                    break
            ref = best
    return _Result(best_x, trace)


def subgradient_descent(
    evaluate: Callable,
    prox: Callable,
    x0: Sequence[np.ndarray],
    *,
    max_iters: int,
    tol: float,
    window: int,
    step0: float = 1.0,
) -> _Result:
    """Proximal subgradient method with ``step0 / sqrt(t)`` steps."""
    x = tuple(np.array(a, dtype=float) for a in x0)
    _, g, best = evaluate(x, 0.0, True)
    best_x, trace, ref = x, [best], best
    for it in range(1, max_iters + 1):
        step = step0 / math.sqrt(it)
        x = prox(_axpy(-step, x, g), step)
        _, g, exact = evaluate(x, 0.0, True)
        if exact < best:
            best, best_x = exact, x
        trace.append(best)
        if it % window == 0:
            if ref - best <= tol * abs(ref) or best == 0.0:
                break
            ref = best
    return _Result(best_x, trace)


# --- combiner training ---------------------------------------------------------------


def _combiner_problem(data: LevelOneDataset, config: TrainConfig):
    cls = config.model_type
    F, y = data.scores, data.labels
    lam, reg = config.lam, config.reg
    hinge = config.loss is LossKind.HINGE

    Y = np.zeros((y.size, data.n_count))
    Y[np.arange(y.size), y] = 1.0

    def evaluate(params, mu, want_grad):
        R = cls.scores_of(F, params)
        if hinge and mu > 0:
            smooth, G, exact = smoothed_hinge(R, y, mu, Y)
        else:
            exact, G = loss_and_grad(R, y, config.loss)
            smooth = exact
        grads = cls.pullback(F, G) if want_grad else None
        w = params[0]
        if reg is RegKind.L2:
            pen = lam * float(np.vdot(w, w))
            smooth += pen
            exact += pen
            if want_grad:
                grads = (grads[0] + 2.0 * lam * w,) + grads[1:]
        else:
            exact += lam * _raw_reg(w, reg, cls)
        return smooth, grads, exact

    def prox(params, step):
        if reg is RegKind.L2 or lam == 0:
            return params
        return (prox_weights(params[0], reg, step * lam, cls),) + params[1:]

    return evaluate, prox


def _raw_reg(w, reg, cls):
    if reg is RegKind.L1:
        return float(np.abs(w).sum())
    if cls is MODEL_TYPES[Combiner.CWS]:
        return float(np.sqrt((w**2).sum(axis=1)).sum())
    n = w.shape[0]
    return float(np.sqrt((w.reshape(n, -1, n) ** 2).sum(axis=(0, 2))).sum())


def train(data: LevelOneDataset, config: TrainConfig) -> TrainResult:
    """Fit combiner weights from the zero model; returns the best iterate."""
    if data.size < 1:
        raise ValueError("cannot train on an empty dataset")
    if data.n_count < 2:
        raise ValueError("training a combiner needs at least two classes")
    start = zero_model(config.combiner, data.m_count, data.n_count)
    evaluate, prox = _combiner_problem(data, config)
    opts = dict(
        max_iters=config.max_iters, tol=config.tol, window=config.window, step0=config.step0
    )
    if config.method == "subgradient":
        res = subgradient_descent(evaluate, prox, start.params, **opts)
    else:
        smoothing = None
        if config.loss is LossKind.HINGE:
            smoothing = (config.smoothing, config.smoothing_min, 4.0)
        res = minimize_composite(evaluate, prox, start.params, smoothing=smoothing, **opts)
    model = config.model_type.from_params(res.params, data.n_count)
    return TrainResult(model, tuple(res.trace))


def accuracy(model: CombinerModel, data: LevelOneDataset) -> float:
    return float(np.mean(predict_many(model, data.scores) == data.labels))


def lambda_search(
    data: LevelOneDataset, config: TrainConfig, grid: Sequence[float] = DEFAULT_GRID
) -> LambdaSearchResult:
    """Pick lambda by stratified 2-fold CV accuracy; ties go to the larger lambda."""
    grid = check_grid(grid)
    require_per_class(data.labels, 2, "2-fold lambda search")
    folds = stratified_folds(data.labels, 2, config.seed)
    halves = [data.subset(np.flatnonzero(folds == f)) for f in (0, 1)]
    accs = []
    for lam in grid:
        cfg = config.with_lambda(lam)
        a = [accuracy(train(halves[f], cfg).model, halves[1 - f]) for f in (0, 1)]
        accs.append(0.5 * (a[0] + a[1]))
    best = max(range(len(grid)), key=lambda i: (accs[i], grid[i]))
    return LambdaSearchResult(grid[best], tuple(accs))


def check_grid(grid) -> tuple:
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(g < 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be nonnegative and strictly increasing")
    return grid
