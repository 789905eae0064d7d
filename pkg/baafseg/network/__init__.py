"""
U-shaped segmentation networks and their ablation variants.
"""

from baafseg.network.gates import GateRecord, gate_stats_frame, merge_gate_frames
from baafseg.network.model import (
    LayerDescriptor,
    LayerKind,
    Model,
    build,
    count_parameters,
    forward,
    predict,
    validate_spec,
)

__all__ = [
    "GateRecord",
    "LayerDescriptor",
    "LayerKind",
    "Model",
    "build",
    "count_parameters",
    "forward",
    "gate_stats_frame",
    "merge_gate_frames",
    "predict",
    "validate_spec",
]
