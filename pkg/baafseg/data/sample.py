"""
Image/mask pairs with provenance.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from baafseg.core.error_handling import EmptyDatasetError, NonBinaryMaskError, ShapeMismatchError


class SourceKind(str, Enum):
    SYNTHETIC = "synthetic"
    FILE = "file"


@dataclass(frozen=True)
class Provenance:
    kind: SourceKind
    seed: Optional[int] = None
    index: Optional[int] = None
    path: Optional[str] = None


@dataclass
class SegSample:
    """One image (1 x H x W, values in [0, 1]) and its binary mask (1 x H x W)."""

    image: np.ndarray
    mask: np.ndarray
    id: str
    provenance: Provenance

    def __post_init__(self):
        if self.image.shape != self.mask.shape or self.image.ndim != 3 or self.image.shape[0] != 1:
            raise ShapeMismatchError("SegSample", self.image.shape, self.mask.shape)
        check_binary(self.mask, self.id)

    @property
    def size(self) -> Tuple[int, int]:
        return tuple(self.image.shape[-2:])


def check_binary(mask: np.ndarray, label: str = "mask") -> None:
    if not np.isin(mask, (0, 1)).all():
        raise NonBinaryMaskError(f"{label}: mask has values other than 0 and 1")


def stack(samples: Sequence[SegSample], dtype=np.float32) -> Tuple[np.ndarray, np.ndarray]:
    """Batch arrays ``(N x 1 x H x W images, N x 1 x H x W masks)``."""
    if not samples:
        raise EmptyDatasetError("No samples to stack")
    images = np.stack([s.image for s in samples]).astype(dtype)
    masks = np.stack([s.mask for s in samples]).astype(dtype)
    return images, masks
