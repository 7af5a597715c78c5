"""Linear stacked generalization with hinge-loss training and group-sparse selection."""

from .core import (
    CWS,
    LSG,
    WS,
    Combiner,
    LevelOneDataset,
    ScoreProfile,
    ShapeError,
    combine,
    embed_cws,
    embed_ws,
    equal_weights,
    predict,
)
from .losses import LossKind, RegKind
from .solver import DEFAULT_GRID, TrainConfig, lambda_search, objective, train

__version__ = "0.1.0"
