"""
Gate statistics collected from attention layers during a forward pass.
"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
import pandas as pd

from baafseg.attention.baaf import GateSnapshot

GATE_COLUMNS = ["layer", "channel", "phi", "gamma", "beta", "alpha_mean"]


@dataclass
class GateRecord:
    layer: str
    snapshot: GateSnapshot


def gate_stats_frame(records: Sequence[GateRecord]) -> pd.DataFrame:
    """One row per (layer, channel), gates averaged over the batch.

    phi and gamma are NaN for additive-fusion layers, which have no calibration
    head. alpha_mean is the mean spatial gate of the layer.
    """
    rows: List[dict] = []
    for record in records:
        snap = record.snapshot
        beta = snap.beta.reshape(-1, snap.beta.shape[-1]).mean(axis=0)
        phi = snap.phi.reshape(-1, beta.size).mean(axis=0) if snap.phi is not None else None
        gamma = snap.gamma.reshape(-1, beta.size).mean(axis=0) if snap.gamma is not None else None
        alpha_mean = float(snap.alpha.mean())
        for c in range(beta.size):
            rows.append(
                {
                    "layer": record.layer,
                    "channel": c,
                    "phi": float(phi[c]) if phi is not None else np.nan,
                    "gamma": float(gamma[c]) if gamma is not None else np.nan,
                    "beta": float(beta[c]),
                    "alpha_mean": alpha_mean,
                }
            )
    return pd.DataFrame(rows, columns=GATE_COLUMNS)


def merge_gate_frames(frames: Sequence[pd.DataFrame]) -> pd.DataFrame:
    """Average per-batch gate frames into one frame (equal weight per batch)."""
    if not frames:
        return pd.DataFrame(columns=GATE_COLUMNS)
    stacked = pd.concat(frames, ignore_index=True)
    return stacked.groupby(["layer", "channel"], sort=False, as_index=False).mean()[GATE_COLUMNS]
