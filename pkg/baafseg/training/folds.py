"""
K-fold partitions.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from baafseg.core.error_handling import ConfigError


@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: Tuple[np.ndarray, ...]

    def test_indices(self, i: int) -> np.ndarray:
        return self.folds[i]

    def train_indices(self, i: int) -> np.ndarray:
        return np.concatenate([f for j, f in enumerate(self.folds) if j != i])

    def sizes(self) -> List[int]:
        return [len(f) for f in self.folds]

    def to_dict(self) -> dict:
        return {"k": self.k, "folds": [f.tolist() for f in self.folds]}


def kfold_split(n: int, k: int, seed: int = 0) -> FoldPlan:
    """Seeded shuffle of ``range(n)`` cut into ``k`` contiguous folds.

    Fold sizes differ by at most one, larger folds first.
    """
    if k < 2:
        raise ConfigError(f"kfold needs K >= 2, got {k}")
    if n < k:
        raise ConfigError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return FoldPlan(k=k, folds=tuple(np.array_split(perm, k)))
