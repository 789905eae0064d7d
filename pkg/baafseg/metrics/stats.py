"""
Welch's unequal-variance t-test.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import betainc

from baafseg.core.error_handling import DegenerateInputError


@dataclass(frozen=True)
class WelchResult:
    t: float
    dof: float
    p: float


def welch_ttest(x: Sequence[float], y: Sequence[float]) -> WelchResult:
    """Two-sided Welch test with Welch-Satterthwaite degrees of freedom.

    When both samples have zero variance the statistic is undefined; p is 1 if
    the means are equal and 0 otherwise, and dof falls back to ``nx + ny - 2``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx, ny = x.size, y.size
    if nx < 2 or ny < 2:
        raise DegenerateInputError(f"welch_ttest needs at least 2 values per sample, got {nx} and {ny}")

    mx, my = x.mean(), y.mean()
    sx, sy = x.var(ddof=1) / nx, y.var(ddof=1) / ny
    se2 = sx + sy
    if se2 == 0:
        if mx == my:
            return WelchResult(t=0.0, dof=float(nx + ny - 2), p=1.0)
        return WelchResult(t=float(np.copysign(np.inf, mx - my)), dof=float(nx + ny - 2), p=0.0)

    t = (mx - my) / np.sqrt(se2)
    dof = se2**2 / (sx**2 / (nx - 1) + sy**2 / (ny - 1))
    p = betainc(dof / 2.0, 0.5, dof / (dof + t * t))
    return WelchResult(t=float(t), dof=float(dof), p=float(min(1.0, max(0.0, p))))
