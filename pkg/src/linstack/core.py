"""Score containers, linear combiner models and the combination rules.

Scores for one instance are laid out classifier-major: ``M`` contiguous
blocks of ``N`` class scores. Batches of profiles are stored as arrays of
shape ``(I, M, N)``. Class indices are 0-based throughout the package.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


class ShapeError(ValueError):
    """Raised when a model and its input disagree on ``(M, N)``."""

    def __init__(self, expected, actual, what="scores"):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(
            f"{what}: expected (M, N) = {self.expected}, got {self.actual}"
        )


class Combiner(enum.Enum):
    WS = "ws"
    CWS = "cws"
    LSG = "lsg"


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScoreProfile:
    """Concatenated base-classifier scores of a single instance."""

    scores: np.ndarray
    m_count: int
    n_count: int

    def __post_init__(self):
        s = _frozen(self.scores).ravel()
        if self.m_count < 1 or self.n_count < 1:
            raise ValueError("m_count and n_count must be positive")
        if s.size != self.m_count * self.n_count:
            raise ShapeError((self.m_count, self.n_count), (s.size,), "profile length")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", s)

    @classmethod
    def from_blocks(cls, blocks) -> "ScoreProfile":
        b = np.asarray(blocks, dtype=float)
        return cls(b.ravel(), b.shape[0], b.shape[1])

    @property
    def blocks(self) -> np.ndarray:
        """``(M, N)`` view; row ``m`` is classifier ``m``'s score vector."""
        return self.scores.reshape(self.m_count, self.n_count)

    def block(self, m: int) -> np.ndarray:
        return self.blocks[m]

    def class_slice(self, n: int) -> np.ndarray:
        """Scores every classifier gives class ``n`` (length ``M``)."""
        return self.scores[n :: self.n_count]


@dataclass(frozen=True)
class LevelOneDataset:
    """Score profiles with their true labels; the combiner's training data."""

    scores: np.ndarray  # (I, M, N)
    labels: np.ndarray  # (I,) int, 0-based
    n_count: int

    def __post_init__(self):
        s = _frozen(self.scores)
        y = _frozen(self.labels, dtype=np.int64).ravel()
        if s.ndim != 3:
            raise ValueError(f"scores must have shape (I, M, N), got {s.shape}")
        if s.shape[0] < 1:
            raise ValueError("dataset is empty")
        if s.shape[2] != self.n_count:
            raise ShapeError((s.shape[1], self.n_count), s.shape[1:], "dataset")
        if y.shape[0] != s.shape[0]:
            raise ValueError(f"{y.shape[0]} labels for {s.shape[0]} profiles")
        if y.min() < 0 or y.max() >= self.n_count:
            raise ValueError(f"labels must lie in [0, {self.n_count})")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y)

    @classmethod
    def from_profiles(cls, profiles: Sequence[ScoreProfile], labels) -> "LevelOneDataset":
        if not profiles:
            raise ValueError("dataset is empty")
        m, n = profiles[0].m_count, profiles[0].n_count
        for p in profiles:
            if (p.m_count, p.n_count) != (m, n):
                raise ShapeError((m, n), (p.m_count, p.n_count), "profile")
        return cls(np.stack([p.blocks for p in profiles]), labels, n)

    @property
    def size(self) -> int:
        return self.scores.shape[0]

    @property
    def m_count(self) -> int:
        return self.scores.shape[1]

    @property
    def profiles(self) -> list[ScoreProfile]:
        return [ScoreProfile.from_blocks(b) for b in self.scores]

    def subset(self, index) -> "LevelOneDataset":
        index = np.asarray(index)
        return LevelOneDataset(self.scores[index], self.labels[index], self.n_count)


class _LinearCombiner:
    """Shared behaviour of the three combiner variants.

    ``params`` is a tuple of arrays whose first entry holds the regularized
    weights; LSG appends the (unregularized) bias.
    """

    combiner: Combiner

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m_count, self.n_count)

    @property
    def weights(self) -> np.ndarray:
        return self.params[0]

    def check(self, m: int, n: int) -> None:
        if (m, n) != self.shape:
            raise ShapeError(self.shape, (m, n))

    def scale(self, c: float):
        return self.from_params(tuple(c * p for p in self.params), self.n_count)

    def scores(self, F: np.ndarray) -> np.ndarray:
        return self.scores_of(F, self.params)

    def with_weights(self, weights):
        return self.from_params((weights,) + tuple(self.params[1:]), self.n_count)


@dataclass(frozen=True)
class WS(_LinearCombiner):
    """Weighted sum: one weight per classifier."""

    u: np.ndarray
    n_count: int

    combiner = Combiner.WS

    def __post_init__(self):
        u = _frozen(self.u).ravel()
        if not np.all(np.isfinite(u)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "u", u)

    @property
    def m_count(self) -> int:
        return self.u.shape[0]

    @property
    def params(self):
        return (self.u,)

    @classmethod
    def from_params(cls, params, n_count):
        return cls(params[0], n_count)

    @classmethod
    def zeros(cls, m, n):
        return cls(np.zeros(m), n)

    @staticmethod
    def scores_of(F, params):
        return np.einsum("imn,m->in", F, params[0])

    @staticmethod
    def pullback(F, G):
        """Gradient w.r.t. ``u`` given gradient ``G`` w.r.t. combined scores."""
        return (np.einsum("in,imn->m", G, F),)


@dataclass(frozen=True)
class CWS(_LinearCombiner):
    """Class-dependent weighted sum; ``V[m, n]`` weighs classifier m for class n."""

    V: np.ndarray

    combiner = Combiner.CWS

    def __post_init__(self):
        V = _frozen(self.V)
        if V.ndim != 2:
            raise ValueError(f"V must be a matrix, got shape {V.shape}")
        if not np.all(np.isfinite(V)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "V", V)

    @property
    def m_count(self) -> int:
        return self.V.shape[0]

    @property
    def n_count(self) -> int:
        return self.V.shape[1]

    @property
    def params(self):
        return (self.V,)

    @classmethod
    def from_params(cls, params, n_count=None):
        return cls(params[0])

    @classmethod
    def zeros(cls, m, n):
        return cls(np.zeros((m, n)))

    @staticmethod
    def scores_of(F, params):
        return np.einsum("imn,mn->in", F, params[0])

    @staticmethod
    def pullback(F, G):
        return (np.einsum("in,imn->mn", G, F),)


@dataclass(frozen=True)
class LSG(_LinearCombiner):
    """Full linear map ``r = W f + b`` with ``W`` of shape ``(N, M*N)``."""

    W: np.ndarray
    b: np.ndarray

    combiner = Combiner.LSG

    def __post_init__(self):
        W = _frozen(self.W)
        b = _frozen(self.b).ravel()
        if W.ndim != 2 or W.shape[1] % W.shape[0] or b.shape[0] != W.shape[0]:
            raise ValueError(f"inconsistent LSG shapes W{W.shape}, b{b.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def m_count(self) -> int:
        return self.W.shape[1] // self.W.shape[0]

    @property
    def n_count(self) -> int:
        return self.W.shape[0]

    @property
    def params(self):
        return (self.W, self.b)

    @classmethod
    def from_params(cls, params, n_count=None):
        return cls(params[0], params[1])

    @classmethod
    def zeros(cls, m, n):
        return cls(np.zeros((n, m * n)), np.zeros(n))

    def block(self, m: int) -> np.ndarray:
        """The ``N x N`` block of ``W`` acting on classifier ``m``."""
        n = self.n_count
        return self.W[:, m * n : (m + 1) * n]

    @staticmethod
    def scores_of(F, params):
        W, b = params
        return F.reshape(F.shape[0], -1) @ W.T + b

    @staticmethod
    def pullback(F, G):
        return (G.T @ F.reshape(F.shape[0], -1), G.sum(axis=0))


CombinerModel = Union[WS, CWS, LSG]

MODEL_TYPES = {Combiner.WS: WS, Combiner.CWS: CWS, Combiner.LSG: LSG}


def zero_model(combiner: Combiner, m: int, n: int) -> CombinerModel:
    return MODEL_TYPES[Combiner(combiner)].zeros(m, n)


def parameter_count(model: CombinerModel) -> int:
    return sum(p.size for p in model.params)


def _as_batch(f) -> np.ndarray:
    if isinstance(f, ScoreProfile):
        return f.blocks[None]
    if isinstance(f, LevelOneDataset):
        return f.scores
    F = np.asarray(f, dtype=float)
    if F.ndim == 2:
        F = F[None]
    if F.ndim != 3:
        raise ValueError(f"expected (M, N) or (I, M, N) scores, got shape {F.shape}")
    return F


def combine_many(model: CombinerModel, F) -> np.ndarray:
    """Combined class scores ``(I, N)`` for a batch of profiles ``(I, M, N)``."""
    F = _as_batch(F)
    model.check(F.shape[1], F.shape[2])
    return model.scores(F)


def combine(model: CombinerModel, f: ScoreProfile) -> np.ndarray:
    return combine_many(model, f)[0]


def predict_many(model: CombinerModel, F) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(combine_many(model, F), axis=1)


def predict(model: CombinerModel, f: ScoreProfile) -> int:
    return int(predict_many(model, f)[0])


def embed_ws(u, n_count: int) -> LSG:
    u = np.asarray(u, dtype=float).ravel()
    if not np.all(np.isfinite(u)):
        raise ValueError("weights must be finite")
    W = np.kron(u[None, :], np.eye(n_count))
    return LSG(W, np.zeros(n_count))


def embed_cws(V) -> LSG:
    V = np.asarray(V, dtype=float)
    m, n = V.shape
    W = np.zeros((n, m * n))
    for k in range(m):
        W[:, k * n : (k + 1) * n] = np.diag(V[k])
    return LSG(W, np.zeros(n))


def embed(model: CombinerModel) -> LSG:
    if isinstance(model, WS):
        return embed_ws(model.u, model.n_count)
    if isinstance(model, CWS):
        return embed_cws(model.V)
    return model


def equal_weights(m_count: int, n_count: int) -> WS:
    """The untrained simple-sum baseline."""
    if m_count < 1:
        raise ValueError("m_count must be >= 1")
    return WS(np.ones(m_count), n_count)
