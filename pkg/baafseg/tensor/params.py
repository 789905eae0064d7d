"""
Named parameter storage.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from baafseg.tensor.tensor import Tape, Tensor


@dataclass
class Parameter:
    value: np.ndarray
    trainable: bool = True


class ParameterStore:
    """Map from dot-separated parameter path to array.

    Iteration is always in lexicographic path order. Non-trainable entries
    (batch-norm running statistics) are stored alongside the weights so that a
    checkpoint captures the full model state.
    """

    def __init__(self):
        self._params: Dict[str, Parameter] = {}

    def add(self, path: str, value: np.ndarray, trainable: bool = True) -> np.ndarray:
        if path in self._params:
            raise KeyError(f"Duplicate parameter path: {path}")
        self._params[path] = Parameter(np.asarray(value), trainable)
        return self._params[path].value

    def __contains__(self, path: str) -> bool:
        return path in self._params

    def __getitem__(self, path: str) -> np.ndarray:
        return self._params[path].value

    def __setitem__(self, path: str, value: np.ndarray) -> None:
        self._params[path].value[...] = value

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._params))

    def items(self) -> Iterator[Tuple[str, Parameter]]:
        for path in sorted(self._params):
            yield path, self._params[path]

    def trainable(self) -> Iterator[Tuple[str, np.ndarray]]:
        for path, p in self.items():
            if p.trainable:
                yield path, p.value

    def is_trainable(self, path: str) -> bool:
        return self._params[path].trainable

    def count(self, trainable_only: bool = True) -> int:
        return sum(p.value.size for _, p in self.items() if p.trainable or not trainable_only)

    def bind(self, tape: Optional[Tape] = None) -> Dict[str, Tensor]:
        """Wrap every parameter as a Tensor; trainable ones are watched on ``tape``."""
        bound: Dict[str, Tensor] = {}
        for path, p in self.items():
            if tape is not None and p.trainable:
                bound[path] = tape.watch(p.value, path)
            else:
                bound[path] = Tensor(p.value)
        return bound

    def state(self) -> Dict[str, np.ndarray]:
        """Deep copy of every value, for best-checkpoint snapshots."""
        return {path: p.value.copy() for path, p in self.items()}

    def load_state(self, state: Dict[str, np.ndarray]) -> None:
        missing = set(self._params) ^ set(state)
        if missing:
            raise KeyError(f"State does not match store: {sorted(missing)}")
        for path, value in state.items():
            self._params[path].value[...] = value

    def astype(self, dtype) -> "ParameterStore":
        converted = ParameterStore()
        for path, p in self.items():
            converted.add(path, p.value.astype(dtype), p.trainable)
        return converted
