"""
Boundary extraction and boundary-distance metrics.

A boundary pixel is a foreground pixel with a 4-neighbour that is background or
lies outside the image. Distances are Euclidean in pixel units. Nearest
neighbours come from a k-d tree; the distance itself is recomputed from integer
coordinate differences so results equal the brute-force definition exactly.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy.ndimage import binary_erosion, generate_binary_structure
from scipy.spatial import cKDTree

from baafseg.metrics.area import as_bool_mask

BOUNDARY_METRICS = ["hd", "assd", "abd"]
_FOUR_CONNECTED = generate_binary_structure(2, 1)


@dataclass(frozen=True)
class BoundarySet:
    """Boundary pixel coordinates as an ``n x 2`` int array of (row, col)."""

    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0


class UndefinedReason(str, Enum):
    EMPTY_FIRST = "empty_first"
    EMPTY_SECOND = "empty_second"
    BOTH_EMPTY = "both_empty"


@dataclass(frozen=True)
class DistanceResult:
    value: Optional[float]
    reason: Optional[UndefinedReason] = None

    @property
    def defined(self) -> bool:
        return self.value is not None

    def __float__(self) -> float:
        return float("nan") if self.value is None else self.value


def extract_boundary(mask: np.ndarray) -> BoundarySet:
    fg = as_bool_mask(np.squeeze(mask))
    interior = binary_erosion(fg, structure=_FOUR_CONNECTED, border_value=0)
    return BoundarySet(np.argwhere(fg & ~interior).astype(np.int64))


def _as_set(b: Union[BoundarySet, np.ndarray]) -> BoundarySet:
    return b if isinstance(b, BoundarySet) else BoundarySet(np.asarray(b, dtype=np.int64).reshape(-1, 2))


def directed_distances(a: BoundarySet, b: BoundarySet) -> np.ndarray:
    """For every point of ``a`` the distance to its nearest point of ``b``."""
    _, idx = cKDTree(b.points).query(a.points, k=1)
    diff = a.points - b.points[idx]
    return np.sqrt((diff * diff).sum(axis=1).astype(np.float64))


def _undefined(a: BoundarySet, b: BoundarySet) -> Optional[DistanceResult]:
    if a.empty and b.empty:
        return DistanceResult(None, UndefinedReason.BOTH_EMPTY)
    if a.empty:
        return DistanceResult(None, UndefinedReason.EMPTY_FIRST)
    if b.empty:
        return DistanceResult(None, UndefinedReason.EMPTY_SECOND)
    return None


def hausdorff(a: Union[BoundarySet, np.ndarray], b: Union[BoundarySet, np.ndarray]) -> DistanceResult:
    a, b = _as_set(a), _as_set(b)
    undefined = _undefined(a, b)
    if undefined:
        return undefined
    return DistanceResult(float(max(directed_distances(a, b).max(), directed_distances(b, a).max())))


def assd(a: Union[BoundarySet, np.ndarray], b: Union[BoundarySet, np.ndarray]) -> DistanceResult:
    """Average symmetric surface distance: both directions pooled."""
    a, b = _as_set(a), _as_set(b)
    undefined = _undefined(a, b)
    if undefined:
        return undefined
    total = directed_distances(a, b).sum() + directed_distances(b, a).sum()
    return DistanceResult(float(total / (len(a) + len(b))))


def abd(a: Union[BoundarySet, np.ndarray], b: Union[BoundarySet, np.ndarray]) -> DistanceResult:
    """Average boundary distance: the mean of the two directed averages."""
    a, b = _as_set(a), _as_set(b)
    undefined = _undefined(a, b)
    if undefined:
        return undefined
    return DistanceResult(float(0.5 * (directed_distances(a, b).mean() + directed_distances(b, a).mean())))


def boundary_metrics(pred: np.ndarray, gt: np.ndarray) -> dict:
    a, b = extract_boundary(pred), extract_boundary(gt)
    return {"hd": hausdorff(a, b), "assd": assd(a, b), "abd": abd(a, b)}
