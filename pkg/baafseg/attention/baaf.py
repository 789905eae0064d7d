"""
Parallel spatial/channel attention with adaptive calibration.

The spatial branch gates every channel with one H x W map; the channel branch
gates every pixel of a channel with one scalar. The adaptive calibration head
squeezes both branch outputs into channel statistics, predicts a pair of
per-channel logits (K, V) and blends the branches with their two-way softmax
(phi for the channel branch, gamma for the spatial branch) before concatenating
them, so the block doubles the channel count.

All functions accept a single C x H x W sample or an N x C x H x W batch.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from baafseg.core.error_handling import ShapeMismatchError
from baafseg.tensor import ops
from baafseg.tensor.init import Seed, as_generator, he_uniform, zeros
from baafseg.tensor.tensor import Tensor

DEFAULT_REDUCTION = 8
MIN_SQUEEZED_DIM = 32


def squeezed_dim(channels: int, reduction: int = DEFAULT_REDUCTION) -> int:
    return max(channels // reduction, MIN_SQUEEZED_DIM)


def channel_hidden(channels: int, reduction: int = DEFAULT_REDUCTION) -> int:
    return max(channels // reduction, 1)


@dataclass
class SpatialAttentionParams:
    w1x1: Tensor  # 1 x C x 1 x 1
    bias: Tensor  # (1,)


@dataclass
class ChannelAttentionParams:
    wf1: Tensor  # hidden x C
    wf2: Tensor  # C x hidden
    r_ca: int = DEFAULT_REDUCTION


@dataclass
class ACMParams:
    wfc1: Tensor  # d x C
    wfc2: Tensor  # 2C x d
    r: int = DEFAULT_REDUCTION

    @property
    def d(self) -> int:
        return self.wfc1.shape[0]


@dataclass
class BAAFBlockParams:
    spatial: SpatialAttentionParams
    channel: ChannelAttentionParams
    acm: Optional[ACMParams] = None

    @property
    def channels(self) -> int:
        return self.spatial.w1x1.shape[1]

    def arrays(self, prefix: str = "") -> Dict[str, np.ndarray]:
        """Flatten into ``{path: array}`` under ``prefix``."""
        lead = f"{prefix}." if prefix else ""
        out = {
            f"{lead}spatial.w1x1": self.spatial.w1x1.data,
            f"{lead}spatial.bias": self.spatial.bias.data,
            f"{lead}channel.wf1": self.channel.wf1.data,
            f"{lead}channel.wf2": self.channel.wf2.data,
        }
        if self.acm is not None:
            out[f"{lead}acm.wfc1"] = self.acm.wfc1.data
            out[f"{lead}acm.wfc2"] = self.acm.wfc2.data
        return out

    @classmethod
    def from_tensors(
        cls,
        tensors: Mapping[str, Tensor],
        prefix: str = "",
        reduction: int = DEFAULT_REDUCTION,
        channel_reduction: int = DEFAULT_REDUCTION,
    ) -> "BAAFBlockParams":
        lead = f"{prefix}." if prefix else ""
        acm = None
        if f"{lead}acm.wfc1" in tensors:
            acm = ACMParams(tensors[f"{lead}acm.wfc1"], tensors[f"{lead}acm.wfc2"], reduction)
        return cls(
            spatial=SpatialAttentionParams(tensors[f"{lead}spatial.w1x1"], tensors[f"{lead}spatial.bias"]),
            channel=ChannelAttentionParams(
                tensors[f"{lead}channel.wf1"], tensors[f"{lead}channel.wf2"], channel_reduction
            ),
            acm=acm,
        )


@dataclass
class GateSnapshot:
    """Gate values of one forward pass, as plain arrays."""

    alpha: np.ndarray
    beta: np.ndarray
    phi: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None


def _as_map(gate: Tensor) -> Tensor:
    """(..., C) -> (..., C, 1, 1) so it broadcasts over H x W."""
    return ops.reshape(gate, gate.shape + (1, 1))


def spatial_attention(F: Tensor, p: SpatialAttentionParams) -> Tuple[Tensor, Tensor]:
    """alpha = sigmoid(relu(conv1x1(F))); F_S = alpha (shared over channels) * F."""
    alpha = ops.sigmoid(ops.relu(ops.conv2d(F, p.w1x1, p.bias, stride=1, padding="same")))
    return ops.mul(F, alpha), alpha


def channel_attention(F: Tensor, p: ChannelAttentionParams) -> Tuple[Tensor, Tensor]:
    """beta = sigmoid(wf2 relu(wf1 GAP(F))); F_C = beta (per channel) * F."""
    squeezed = ops.global_avg_pool(F)
    beta = ops.sigmoid(ops.dense(ops.relu(ops.dense(squeezed, p.wf1)), p.wf2))
    return ops.mul(F, _as_map(beta)), beta


def acm_fuse(F_S: Tensor, F_C: Tensor, p: ACMParams) -> Tuple[Tensor, Tensor, Tensor]:
    """Blend the two branches with a per-channel two-way softmax and concatenate.

    Z = wfc2 relu(wfc1 (GAP(F_S) + GAP(F_C))) is split as K = Z[:C], V = Z[C:];
    phi = softmax(K, V)[0] weights F_C and gamma = softmax(K, V)[1] weights F_S.
    Returns ``(concat(phi * F_C, gamma * F_S), phi, gamma)``.
    """
    if F_S.shape != F_C.shape:
        raise ShapeMismatchError("acm_fuse", F_S.shape, F_C.shape)
    c = F_S.shape[-3]
    stats = ops.add(ops.global_avg_pool(F_S), ops.global_avg_pool(F_C))
    z = ops.dense(ops.relu(ops.dense(stats, p.wfc1)), p.wfc2)
    pair = ops.softmax(ops.reshape(z, z.shape[:-1] + (2, c)), axis=-2)
    phi = ops.select(pair, 0, axis=-2)
    gamma = ops.select(pair, 1, axis=-2)
    fused = ops.concat_channels(ops.mul(F_C, _as_map(phi)), ops.mul(F_S, _as_map(gamma)))
    return fused, phi, gamma


def baaf_forward_with_gates(F: Tensor, p: BAAFBlockParams) -> Tuple[Tensor, GateSnapshot]:
    if p.acm is None:
        raise ValueError("baaf_forward needs ACM parameters")
    F_S, alpha = spatial_attention(F, p.spatial)
    F_C, beta = channel_attention(F, p.channel)
    F_A, phi, gamma = acm_fuse(F_S, F_C, p.acm)
    return F_A, GateSnapshot(alpha.data, beta.data, phi.data, gamma.data)


def baaf_forward(F: Tensor, p: BAAFBlockParams) -> Tensor:
    """Full block: C x H x W in, 2C x H x W out."""
    return baaf_forward_with_gates(F, p)[0]


def pham_fuse_add_with_gates(F: Tensor, p: BAAFBlockParams) -> Tuple[Tensor, GateSnapshot]:
    F_S, alpha = spatial_attention(F, p.spatial)
    F_C, beta = channel_attention(F, p.channel)
    return ops.add(F_S, F_C), GateSnapshot(alpha.data, beta.data)


def pham_fuse_add(F: Tensor, p: BAAFBlockParams) -> Tensor:
    """Additive fusion of the two branches; keeps the channel count."""
    return pham_fuse_add_with_gates(F, p)[0]


def init_baaf(
    channels: int,
    reduction: int = DEFAULT_REDUCTION,
    seed: Seed = 0,
    channel_reduction: int = DEFAULT_REDUCTION,
    with_acm: bool = True,
    dtype: Optional[np.dtype] = None,
) -> BAAFBlockParams:
    """He-uniform weights, zero biases; deterministic for a fixed seed."""
    if channels < 1 or reduction < 1 or channel_reduction < 1:
        raise ValueError(f"init_baaf: channels={channels}, reduction={reduction} must be >= 1")
    rng = as_generator(seed)
    hidden = channel_hidden(channels, channel_reduction)
    spatial = SpatialAttentionParams(
        w1x1=Tensor(he_uniform(rng, (1, channels, 1, 1), channels, dtype)),
        bias=Tensor(zeros((1,), dtype)),
    )
    channel = ChannelAttentionParams(
        wf1=Tensor(he_uniform(rng, (hidden, channels), channels, dtype)),
        wf2=Tensor(he_uniform(rng, (channels, hidden), hidden, dtype)),
        r_ca=channel_reduction,
    )
    acm = None
    if with_acm:
        d = squeezed_dim(channels, reduction)
        acm = ACMParams(
            wfc1=Tensor(he_uniform(rng, (d, channels), channels, dtype)),
            wfc2=Tensor(he_uniform(rng, (2 * channels, d), d, dtype)),
            r=reduction,
        )
    return BAAFBlockParams(spatial, channel, acm)
