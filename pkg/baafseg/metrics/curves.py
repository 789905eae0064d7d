"""
Threshold-sweep precision-recall and ROC curves over pooled pixels.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from baafseg.core.error_handling import EmptyDatasetError, ShapeMismatchError
from baafseg.metrics.area import as_bool_mask

DEFAULT_THRESHOLDS = 256
CURVE_COLUMNS = ["threshold", "precision", "recall", "tpr", "fpr"]


@dataclass
class CurveResult:
    points: pd.DataFrame
    pr_points: np.ndarray  # (recall, precision) from the highest threshold down
    roc_points: np.ndarray  # (fpr, tpr) from (0, 0) to (1, 1)
    auc_roc: float
    auc_pr: float


def _pool(preds: Sequence[np.ndarray], gts: Sequence[np.ndarray]):
    if len(preds) == 0 or len(preds) != len(gts):
        raise EmptyDatasetError(f"curves need aligned, non-empty lists (got {len(preds)} and {len(gts)})")
    scores, labels = [], []
    for p, g in zip(preds, gts):
        p = np.asarray(p, dtype=np.float64)
        g = as_bool_mask(g, "gt")
        if p.shape != g.shape:
            raise ShapeMismatchError("curves", p.shape, g.shape)
        scores.append(p.ravel())
        labels.append(g.ravel())
    return np.concatenate(scores), np.concatenate(labels)


def _path(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Descending threshold order; x is then non-decreasing.
    return np.stack([x[::-1], y[::-1]], axis=1)


def curves(
    preds: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    thresholds: int = DEFAULT_THRESHOLDS,
) -> CurveResult:
    """A pixel is predicted foreground at threshold t when its score is >= t."""
    scores, labels = _pool(preds, gts)
    grid = np.linspace(0.0, 1.0, thresholds)
    fg = np.sort(scores[labels])
    bg = np.sort(scores[~labels])
    tp = (fg.size - np.searchsorted(fg, grid, side="left")).astype(np.float64)
    fp = (bg.size - np.searchsorted(bg, grid, side="left")).astype(np.float64)
    fn = fg.size - tp

    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 1.0)
        tpr = tp / fg.size if fg.size else np.ones_like(tp)
        fpr = fp / bg.size if bg.size else np.zeros_like(fp)
    recall = tpr if fg.size else np.where(fn == 0, 1.0, 0.0)

    roc = _path(np.concatenate([[1.0], fpr, [0.0]]), np.concatenate([[1.0], tpr, [0.0]]))
    pr = _path(recall, precision)
    points = pd.DataFrame(
        {"threshold": grid, "precision": precision, "recall": recall, "tpr": tpr, "fpr": fpr},
        columns=CURVE_COLUMNS,
    )
    return CurveResult(
        points=points,
        pr_points=pr,
        roc_points=roc,
        auc_roc=float(trapezoid(roc[:, 1], roc[:, 0])),
        auc_pr=float(trapezoid(pr[:, 1], pr[:, 0])),
    )
