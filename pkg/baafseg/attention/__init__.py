"""
Attention blocks: spatial and channel gates, adaptive calibration, BAAF.
"""

from baafseg.attention.baaf import (
    ACMParams,
    BAAFBlockParams,
    ChannelAttentionParams,
    GateSnapshot,
    SpatialAttentionParams,
    acm_fuse,
    baaf_forward,
    baaf_forward_with_gates,
    channel_attention,
    channel_hidden,
    init_baaf,
    pham_fuse_add,
    pham_fuse_add_with_gates,
    spatial_attention,
    squeezed_dim,
)

__all__ = [
    "ACMParams",
    "BAAFBlockParams",
    "ChannelAttentionParams",
    "GateSnapshot",
    "SpatialAttentionParams",
    "acm_fuse",
    "baaf_forward",
    "baaf_forward_with_gates",
    "channel_attention",
    "channel_hidden",
    "init_baaf",
    "pham_fuse_add",
    "pham_fuse_add_with_gates",
    "spatial_attention",
    "squeezed_dim",
]
