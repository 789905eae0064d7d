"""
Binary cross-entropy on probability maps.
"""

from typing import Optional, Union

import numpy as np

from baafseg.core.config import settings
from baafseg.core.error_handling import ShapeMismatchError
from baafseg.tensor.ops import as_tensor, record_op
from baafseg.tensor.tensor import OpKind, Tensor


def bce_loss(pred: Tensor, target: Union[Tensor, np.ndarray], clamp: Optional[float] = None) -> Tensor:
    """``-mean(y ln p + (1 - y) ln(1 - p))`` over every element.

    ``p`` is clamped to ``[clamp, 1 - clamp]`` before the logs. The backward
    rule is evaluated at the clamped value and is not zeroed outside the clamp,
    so saturated predictions still receive a gradient.
    """
    clamp = settings.BCE_CLAMP if clamp is None else clamp
    target = as_tensor(target, like=pred)
    if pred.shape != target.shape:
        raise ShapeMismatchError("bce_loss", pred.shape, target.shape)

    p = np.clip(pred.data, clamp, 1.0 - clamp)
    y = target.data
    n = pred.size
    out = np.asarray(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)), dtype=pred.dtype)

    def backward_fn(g: np.ndarray):
        gp = (g / n) * ((1.0 - y) / (1.0 - p) - y / p)
        return gp.astype(pred.dtype, copy=False), None

    return record_op(OpKind.BCE, (pred, target), out, backward_fn)


def bce_value(probs: np.ndarray, targets: np.ndarray) -> float:
    return bce_loss(Tensor(np.asarray(probs)), np.asarray(targets)).item()
