"""
Adam with bias correction.
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from baafseg.core.error_handling import MissingGradientError
from baafseg.tensor.params import ParameterStore


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(
    params: ParameterStore,
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> AdamState:
    """Update every trainable parameter of ``params`` in place."""
    trainable = list(params.trainable())
    missing = [path for path, _ in trainable if path not in grads]
    if missing:
        raise MissingGradientError(f"No gradient for {len(missing)} parameter(s): {missing[:5]}")

    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for path, value in trainable:
        g = grads[path]
        if g.shape != value.shape:
            raise MissingGradientError(f"Gradient for {path} has shape {g.shape}, expected {value.shape}")
        m = state.m.setdefault(path, np.zeros_like(value))
        v = state.v.setdefault(path, np.zeros_like(value))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        value -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(value.dtype, copy=False)
    return state
