"""
Central-difference gradient checking.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from baafseg.tensor import ops
from baafseg.tensor.tensor import Tape, Tensor, backward

logger = logging.getLogger(__name__)

Builder = Callable[[Dict[str, Tensor]], Tensor]
Coordinate = Tuple[str, Tuple[int, ...]]


@dataclass
class GradCheckReport:
    """Outcome of one gradient check."""

    max_rel_error: float
    worst: Optional[Coordinate]
    tolerance: float
    checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    @property
    def failing(self) -> Optional[Coordinate]:
        return None if self.passed else self.worst


def project(out: Tensor, seed: int = 0) -> Tensor:
    """Reduce ``out`` to a scalar through a fixed random weighting."""
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal(out.shape).astype(out.dtype)
    return ops.sum_all(ops.mul(out, weights))


def grad_check(
    builder: Builder,
    inputs: Dict[str, np.ndarray],
    epsilon: float = 1e-5,
    tolerance: float = 1e-4,
    max_coords: Optional[int] = None,
    seed: int = 0,
    require_float64: bool = True,
) -> GradCheckReport:
    """Compare tape gradients of ``builder`` against central differences.

    ``builder`` maps named input tensors to a scalar loss. The relative error of
    each coordinate is ``|a - n| / max(1, |a|, |n|)``. Failures are reported,
    not raised.
    """
    if require_float64:
        for name, value in inputs.items():
            if value.dtype != np.float64:
                raise TypeError(f"grad_check needs float64 inputs; {name} is {value.dtype}")

    tape = Tape()
    watched = {name: tape.watch(value.copy(), name) for name, value in inputs.items()}
    analytic = backward(tape, builder(watched))

    coords: List[Coordinate] = [
        (name, idx) for name in sorted(inputs) for idx in np.ndindex(*inputs[name].shape)
    ]
    if max_coords is not None and len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        picked = sorted(rng.choice(len(coords), size=max_coords, replace=False))
        coords = [coords[i] for i in picked]

    def evaluate(name: str, idx: Tuple[int, ...], delta: float) -> float:
        shifted = {k: v.copy() for k, v in inputs.items()}
        shifted[name][idx] += delta
        return builder({k: Tensor(v) for k, v in shifted.items()}).item()

    worst: Optional[Coordinate] = None
    max_err = 0.0
    for name, idx in coords:
        numeric = (evaluate(name, idx, epsilon) - evaluate(name, idx, -epsilon)) / (2 * epsilon)
        a = float(analytic[name][idx])
        err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
        if err > max_err or worst is None:
            max_err, worst = err, (name, idx)

    report = GradCheckReport(max_rel_error=max_err, worst=worst, tolerance=tolerance, checked=len(coords))
    if not report.passed:
        logger.warning(
            f"Gradient check failed at {worst}: relative error {max_err:.3e} > {tolerance:.1e}",
            extra={"coordinate": str(worst), "rel_error": max_err},
        )
    return report
