"""Level-1 data by internal cross-validation, and the deployed ensemble."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselearners import (
    KNN,
    GaussianNB,
    MultinomialLogistic,
    NearestMean,
    RandomFeatureMargin,
)
from .core import LevelOneDataset
from .splits import StratificationError, derive_seed, stratified_folds


class LearnerError(RuntimeError):
    def __init__(self, index, learner, cause):
        self.index = index
        super().__init__(f"base learner {index} ({learner!r}) failed: {cause}")


@dataclass(frozen=True)
class Member:
    """One ensemble slot: a learner trained on a seeded subsample."""

    learner: object
    fraction: float = 1.0
    bag: int = 0

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError(f"subsample fraction must be in (0, 1], got {self.fraction}")


@dataclass(frozen=True)
class EnsembleSpec:
    members: tuple = field(default_factory=tuple)
    k: int = 4

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        if self.k < 2:
            raise ValueError(f"internal CV needs k >= 2, got {self.k}")

    @property
    def m_count(self) -> int:
        return len(self.members)


DEFAULT_KINDS = (
    NearestMean(),
    GaussianNB(),
    KNN(k=3),
    MultinomialLogistic(l2=1e-2),
    RandomFeatureMargin(width=1.0, n_features=100, lam=1e-3),
)


def diverse_spec(bags: int = 5, fraction: float = 0.8, kinds=DEFAULT_KINDS, k: int = 4) -> EnsembleSpec:
    """Every kind trained on each of ``bags`` random subsets; member order is bag-major."""
    if bags < 1:
        raise ValueError("need at least one bag")
    if not kinds:
        raise ValueError("need at least one learner kind")
    members = []
    for b in range(bags):
        for learner in kinds:
            if isinstance(learner, RandomFeatureMargin):
                learner = _reseed(learner, b)
            members.append(Member(learner, fraction, bag=b))
    return EnsembleSpec(tuple(members), k)


def _reseed(learner: RandomFeatureMargin, index: int) -> RandomFeatureMargin:
    return RandomFeatureMargin(
        width=learner.width,
        n_features=learner.n_features,
        lam=learner.lam,
        seed=derive_seed(learner.seed, "rff", index),
        max_iters=learner.max_iters,
        tol=learner.tol,
    )


NONDIVERSE_WIDTHS = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
NONDIVERSE_LAMBDAS = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)


def nondiverse_spec(
    widths: Sequence[float] = NONDIVERSE_WIDTHS,
    lambdas: Sequence[float] = NONDIVERSE_LAMBDAS,
    n_features: int = 100,
    k: int = 4,
) -> EnsembleSpec:
    """One family (random-feature margin classifiers) over a width x lambda grid."""
    grid = [(w, lam) for w in widths for lam in lambdas]
    if not grid:
        raise ValueError("parameter grid is empty")
    members = [
        Member(RandomFeatureMargin(width=w, n_features=n_features, lam=lam, seed=i))
        for i, (w, lam) in enumerate(grid)
    ]
    return EnsembleSpec(tuple(members), k)


def member_subsample(y: np.ndarray, member: Member, seed: int) -> np.ndarray:
    """Boolean mask of the member's bag, drawn per class without replacement."""
    mask = np.zeros(y.shape[0], dtype=bool)
    if member.fraction >= 1.0:
        mask[:] = True
        return mask
    rng = np.random.default_rng(derive_seed(seed, "bag", member.bag))
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        take = max(1, int(round(member.fraction * idx.size)))
        mask[rng.choice(idx, size=take, replace=False)] = True
    return mask


def _fit_member(i, member, X, y, n_classes):
    try:
        return member.learner.fit(X, y, n_classes)
    except Exception as exc:  # annotate with the member index
        raise LearnerError(i, member.learner, exc) from exc


def _n_classes(y, n_classes):
    return int(np.max(y)) + 1 if n_classes is None else n_classes


def internal_cv_scores(
    X, y, spec: EnsembleSpec, seed: int, n_classes: int | None = None
) -> LevelOneDataset:
    """Score every training instance with models that never saw it.

    One stratified fold partition (seeded) is shared by all members; member
    ``m`` scoring fold ``f`` is trained on the other folds intersected with
    its own bag.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n = _n_classes(y, n_classes)
    folds = stratified_folds(y, spec.k, derive_seed(seed, "internal-cv"))
    present = np.unique(y)
    for f in range(spec.k):
        rest = y[folds != f]
        missing = np.setdiff1d(present, rest)
        if missing.size:
            raise StratificationError(
                f"class(es) {missing.tolist()} vanish from the training part of fold {f}"
            )
    scores = np.empty((y.shape[0], spec.m_count, n))
    for i, member in enumerate(spec.members):
        bag = member_subsample(y, member, seed)
        for f in range(spec.k):
            test = folds == f
            fit_idx = np.flatnonzero(~test & bag)
            model = _fit_member(i, member, X[fit_idx], y[fit_idx], n)
            scores[test, i, :] = model.scores(X[test])
    return LevelOneDataset(scores, y, n)


def fit_ensemble(X, y, spec: EnsembleSpec, seed: int, n_classes: int | None = None) -> list:
    """Train every member on the full training data (restricted to its bag)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n = _n_classes(y, n_classes)
    models = []
    for i, member in enumerate(spec.members):
        idx = np.flatnonzero(member_subsample(y, member, seed))
        models.append(_fit_member(i, member, X[idx], y[idx], n))
    return models


def score_ensemble(models: Sequence, X) -> np.ndarray:
    """Test-time profiles ``(I, M, N)`` in ensemble order."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.stack([m.scores(X) for m in models], axis=1)
