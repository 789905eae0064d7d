"""
Loss, optimizer, fold plans, the training loop and cross-validation.
"""

from baafseg.training.crossval import CrossValResult, FoldResult, cross_validate
from baafseg.training.folds import FoldPlan, kfold_split
from baafseg.training.loss import bce_loss, bce_value
from baafseg.training.optim import AdamState, adam_step
from baafseg.training.trainer import (
    HISTORY_COLUMNS,
    TrainResult,
    fit,
    mean_dice,
    minibatches,
    split_validation,
)

__all__ = [
    "AdamState",
    "CrossValResult",
    "FoldPlan",
    "FoldResult",
    "HISTORY_COLUMNS",
    "TrainResult",
    "adam_step",
    "bce_loss",
    "bce_value",
    "cross_validate",
    "fit",
    "kfold_split",
    "mean_dice",
    "minibatches",
    "split_validation",
]
