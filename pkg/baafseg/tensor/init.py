"""
Weight initializers.
"""

from typing import Optional, Sequence, Union

import numpy as np

from baafseg.tensor.tensor import get_default_dtype

Seed = Union[int, Sequence[int], np.random.Generator]


def as_generator(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def he_uniform(
    rng: np.random.Generator,
    shape: Sequence[int],
    fan_in: int,
    dtype: Optional[np.dtype] = None,
) -> np.ndarray:
    """Uniform in ``[-sqrt(6 / fan_in), sqrt(6 / fan_in)]``."""
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype or get_default_dtype())


def zeros(shape: Sequence[int], dtype: Optional[np.dtype] = None) -> np.ndarray:
    return np.zeros(tuple(shape), dtype=dtype or get_default_dtype())


def ones(shape: Sequence[int], dtype: Optional[np.dtype] = None) -> np.ndarray:
    return np.ones(tuple(shape), dtype=dtype or get_default_dtype())
