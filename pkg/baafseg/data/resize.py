"""
Resizing of ``1 x H x W`` samples.

Both kinds map output pixel centres onto the input grid with the
align-corners-false convention: output index ``i`` sits at input coordinate
``(i + 0.5) * in / out - 0.5``. Bilinear clamps coordinates to the edge; nearest
takes ``floor((i + 0.5) * in / out)`` and so keeps masks binary.
"""

from enum import Enum
from typing import Tuple, Union

import numpy as np

from baafseg.tensor.tensor import Tensor


class ResizeKind(str, Enum):
    BILINEAR = "bilinear"
    NEAREST = "nearest"


def _bilinear_axis(n_in: int, n_out: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def _nearest_axis(n_in: int, n_out: int) -> np.ndarray:
    idx = np.floor((np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out)).astype(np.intp)
    return np.minimum(idx, n_in - 1)


def resize(
    t: Union[Tensor, np.ndarray],
    target: Tuple[int, int],
    kind: Union[ResizeKind, str] = ResizeKind.BILINEAR,
) -> np.ndarray:
    data = t.data if isinstance(t, Tensor) else np.asarray(t)
    kind = ResizeKind(kind)
    out_h, out_w = target
    if out_h < 1 or out_w < 1:
        raise ValueError(f"resize target must be positive, got {target}")
    in_h, in_w = data.shape[-2:]
    if (in_h, in_w) == (out_h, out_w):
        return data.copy()

    if kind is ResizeKind.NEAREST:
        rows, cols = _nearest_axis(in_h, out_h), _nearest_axis(in_w, out_w)
        return data[..., rows, :][..., :, cols]

    work = data.astype(np.float64)
    r0, r1, wr = _bilinear_axis(in_h, out_h)
    c0, c1, wc = _bilinear_axis(in_w, out_w)
    wr = wr[:, None]
    rows = work[..., r0, :] * (1 - wr) + work[..., r1, :] * wr
    out = rows[..., :, c0] * (1 - wc) + rows[..., :, c1] * wc
    return out.astype(data.dtype if np.issubdtype(data.dtype, np.floating) else np.float64)
