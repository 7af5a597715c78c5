"""5x2 cross-validation, classifier-selection counts and the Wilcoxon test."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .core import CombinerModel, equal_weights, predict_many
from .losses import group_norms
from .solver import TrainConfig, lambda_search, train
from .splits import derive_seed, require_per_class, stratified_folds
from .stacking import EnsembleSpec, fit_ensemble, internal_cv_scores, score_ensemble

log = logging.getLogger(__name__)

N_STACKS = 10


def selected_count(model: CombinerModel, rel_tol: float = 1e-6) -> int:
    """Classifiers whose weight group is nonzero relative to the largest group."""
    g = group_norms(model)
    if g.size == 0:
        return 0
    return int(np.sum(g > rel_tol * (1.0 + g.max())))


def error_pct(predicted, truth) -> float:
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    return 100.0 * int(np.sum(predicted != truth)) / truth.size


@dataclass(frozen=True)
class Method:
    """A combiner to evaluate. ``config=None`` is the equal-weights baseline;
    ``grid=None`` trains at ``config.lam`` instead of searching."""

    name: str
    config: TrainConfig | None = None
    grid: tuple | None = None


EW = Method("EW")


@dataclass(frozen=True)
class StackResults:
    errors: tuple
    selected: tuple
    lambdas: tuple

    def __post_init__(self):
        if not len(self.errors) == len(self.selected) == len(self.lambdas) == N_STACKS:
            raise ValueError(f"expected {N_STACKS} stacks")
        if any(not 0 <= e <= 100 for e in self.errors):
            raise ValueError("error percentages must lie in [0, 100]")

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def std(self) -> float:
        return float(np.std(self.errors, ddof=1))

    @property
    def mean_selected(self) -> float:
        return float(np.mean(self.selected))


def _fit_method(method: Method, level1, m_count, n_count, seed):
    if method.config is None:
        return equal_weights(m_count, n_count), float("nan")
    cfg = method.config
    lam = cfg.lam
    if method.grid is not None:
        search_cfg = dataclasses.replace(cfg, seed=derive_seed(seed, "lambda"))
        lam = lambda_search(level1, search_cfg, method.grid).best_lambda
    return train(level1, cfg.with_lambda(lam)).model, lam


def five_by_two(
    X,
    y,
    spec: EnsembleSpec,
    methods: Sequence[Method] | Method,
    master_seed: int,
    n_classes: int | None = None,
) -> dict:
    """Run 5 repetitions of stratified 2-fold CV; returns ``{method name: StackResults}``.

    Level-1 data and the deployed ensemble are built once per stack and
    shared by every method.
    """
    if isinstance(methods, Method):
        methods = [methods]
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ValueError("method names must be unique")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n = int(y.max()) + 1 if n_classes is None else n_classes
    out = {m.name: {"errors": [], "selected": [], "lambdas": []} for m in methods}

    if np.unique(y).size == 1:
        for m in methods:
            out[m.name]["errors"] = [0.0] * N_STACKS
            out[m.name]["selected"] = [spec.m_count if m.config is None else 0] * N_STACKS
            out[m.name]["lambdas"] = [float("nan")] * N_STACKS
        return {k: StackResults(**{f: tuple(v) for f, v in d.items()}) for k, d in out.items()}

    require_per_class(y, 2, "5x2 cross-validation")
    for rep in range(5):
        folds = stratified_folds(y, 2, derive_seed(master_seed, "5x2", rep))
        for half in (0, 1):
            stack = 2 * rep + half
            tr, te = np.flatnonzero(folds == half), np.flatnonzero(folds != half)
            seed = derive_seed(master_seed, "stack", stack)
            level1 = internal_cv_scores(X[tr], y[tr], spec, seed, n)
            test_scores = score_ensemble(fit_ensemble(X[tr], y[tr], spec, seed, n), X[te])
            for m in methods:
                try:
                    model, lam = _fit_method(m, level1, spec.m_count, n, seed)
                except Exception as exc:
                    raise RuntimeError(f"method {m.name!r}, stack {stack}: {exc}") from exc
                rec = out[m.name]
                rec["errors"].append(error_pct(predict_many(model, test_scores), y[te]))
                rec["selected"].append(selected_count(model))
                rec["lambdas"].append(lam)
                log.debug("stack %d %s: %.2f%%", stack, m.name, rec["errors"][-1])
    return {k: StackResults(**{f: tuple(v) for f, v in d.items()}) for k, d in out.items()}


# --- Wilcoxon signed-rank test ---------------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    w_plus: float
    p_value: float
    decision: bool | None  # None when inconclusive
    n: int  # nonzero differences used
    method: str  # "exact", "normal" or "inconclusive"


EXACT_MAX_N = 20
MIN_N = 5


def signed_rank_null_cdf(ranks, w_plus: float) -> float:
    """P(W+ <= w_plus) when each rank's sign is an independent fair coin.

    Average ranks are multiples of 1/2, so the distribution is tabulated over
    doubled ranks by dynamic programming.
    """
    r2 = np.rint(2 * np.asarray(ranks, dtype=float)).astype(np.int64)
    counts = np.zeros(int(r2.sum()) + 1)
    counts[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    target = int(np.floor(2 * w_plus + 1e-9))
    return float(counts[: target + 1].sum() / 2.0 ** r2.size)


def wilcoxon_one_tailed(a, b, alpha: float = 0.05) -> WilcoxonResult:
    """One-sided signed-rank test of the alternative "a tends to be smaller than b".

    Zero differences are dropped, tied magnitudes share average ranks. The
    p-value is exact for up to 20 nonzero differences and uses the
    tie-corrected normal approximation (with continuity correction) above.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be 1-D and of equal length")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n < MIN_N:
        return WilcoxonResult(float("nan"), float("nan"), float("nan"), None, n, "inconclusive")
    ranks = rankdata(np.abs(d), method="average")
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    if n <= EXACT_MAX_N:
        p, how = signed_rank_null_cdf(ranks, w_plus), "exact"
    else:
        _, ties = np.unique(ranks, return_counts=True)
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(ties**3 - ties) / 48.0
        p, how = float(norm.cdf((w_plus + 0.5 - mean) / np.sqrt(var))), "normal"
    return WilcoxonResult(min(w_plus, w_minus), w_plus, p, bool(p <= alpha), n, how)
