"""
Pixel confusion counts and the area-overlap metrics.
"""

from dataclasses import asdict, dataclass
from typing import Dict

import numpy as np

from baafseg.core.error_handling import NonBinaryMaskError, ShapeMismatchError

AREA_METRICS = ["dice", "jaccard", "precision", "recall", "specificity"]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def as_bool_mask(mask: np.ndarray, label: str = "mask") -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype == bool:
        return mask
    if not np.isin(mask, (0, 1)).all():
        raise NonBinaryMaskError(f"{label} has values other than 0 and 1")
    return mask.astype(bool)


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    p, g = as_bool_mask(pred, "pred"), as_bool_mask(gt, "gt")
    if p.shape != g.shape:
        raise ShapeMismatchError("confusion", p.shape, g.shape)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return ConfusionCounts(tp=tp, fp=fp, tn=p.size - tp - fp - fn, fn=fn)


def _ratio(num: int, den: int, both_empty: bool) -> float:
    if den:
        return num / den
    return 1.0 if both_empty else 0.0


def area_metrics(c: ConfusionCounts) -> Dict[str, float]:
    """Dice, Jaccard, Precision, Recall and Specificity.

    A 0/0 ratio is 1 when prediction and ground truth are both empty of the
    class the ratio is about, and 0 otherwise.
    """
    return {
        "dice": _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, True),
        "jaccard": _ratio(c.tp, c.tp + c.fp + c.fn, True),
        "precision": _ratio(c.tp, c.tp + c.fp, c.fn == 0),
        "recall": _ratio(c.tp, c.tp + c.fn, c.fp == 0),
        "specificity": _ratio(c.tn, c.tn + c.fp, c.fn == 0),
    }
