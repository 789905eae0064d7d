"""
Tests for the spatial/channel gates, the calibration head and the fused blocks.
"""

import numpy as np
import pytest

from baafseg.attention.baaf import (
    BAAFBlockParams,
    acm_fuse,
    baaf_forward,
    baaf_forward_with_gates,
    channel_attention,
    channel_hidden,
    init_baaf,
    pham_fuse_add,
    spatial_attention,
    squeezed_dim,
)
from baafseg.core.error_handling import ShapeMismatchError
from baafseg.tensor.tensor import Tensor


def _zero_block(channels: int) -> BAAFBlockParams:
    block = init_baaf(channels, dtype=np.float64)
    return BAAFBlockParams.from_tensors({k: Tensor(np.zeros_like(v)) for k, v in block.arrays().items()})


class TestDimensions:
    @pytest.mark.parametrize("channels, expected", [(8, 32), (256, 32), (512, 64), (1024, 128)])
    def test_squeezed_dim_has_a_floor(self, channels, expected):
        assert squeezed_dim(channels, 8) == expected

    def test_channel_hidden_never_zero(self):
        assert channel_hidden(4, 8) == 1
        assert channel_hidden(64, 8) == 8

    def test_parameter_shapes(self):
        block = init_baaf(16, dtype=np.float64)
        arrays = block.arrays("attn")
        assert arrays["attn.spatial.w1x1"].shape == (1, 16, 1, 1)
        assert arrays["attn.channel.wf1"].shape == (2, 16)
        assert arrays["attn.channel.wf2"].shape == (16, 2)
        assert arrays["attn.acm.wfc1"].shape == (32, 16)
        assert arrays["attn.acm.wfc2"].shape == (32, 32)

    def test_init_is_deterministic(self):
        a = init_baaf(8, seed=5).arrays()
        b = init_baaf(8, seed=5).arrays()
        for key in a:
            np.testing.assert_array_equal(a[key], b[key])

    def test_additive_block_has_no_calibration_head(self):
        block = init_baaf(8, with_acm=False)
        assert block.acm is None
        assert not any(k.startswith("acm") for k in block.arrays())

    def test_invalid_channels(self):
        with pytest.raises(ValueError):
            init_baaf(0)


class TestBranches:
    def test_spatial_gate_is_shared_over_channels(self, rng):
        block = init_baaf(4, seed=rng, dtype=np.float64)
        x = Tensor(rng.standard_normal((2, 4, 5, 5)))
        F_S, alpha = spatial_attention(x, block.spatial)
        assert alpha.shape == (2, 1, 5, 5)
        np.testing.assert_allclose(F_S.data, x.data * alpha.data)

    def test_channel_gate_is_per_channel(self, rng):
        block = init_baaf(4, seed=rng, dtype=np.float64)
        x = Tensor(rng.standard_normal((2, 4, 5, 5)))
        F_C, beta = channel_attention(x, block.channel)
        assert beta.shape == (2, 4)
        np.testing.assert_allclose(F_C.data, x.data * beta.data[..., None, None])

    def test_gate_ranges(self, rng):
        block = init_baaf(8, seed=rng, dtype=np.float64)
        _, snap = baaf_forward_with_gates(Tensor(rng.standard_normal((3, 8, 4, 4))), block)
        assert (snap.alpha >= 0.5).all() and (snap.alpha < 1).all()
        assert (snap.beta > 0).all() and (snap.beta < 1).all()


class TestCalibration:
    @pytest.mark.parametrize("channels", [4, 8, 32])
    def test_weights_partition_unity(self, channels):
        rng = np.random.default_rng(channels)
        for _ in range(20):
            block = init_baaf(channels, seed=rng, dtype=np.float64)
            _, snap = baaf_forward_with_gates(Tensor(rng.standard_normal((2, channels, 4, 4))), block)
            np.testing.assert_allclose(snap.phi + snap.gamma, 1.0, atol=1e-6)
            assert snap.phi.shape == (2, channels)

    def test_fused_output_halves(self, rng):
        block = init_baaf(4, seed=rng, dtype=np.float64)
        F_S = Tensor(rng.standard_normal((1, 4, 3, 3)))
        F_C = Tensor(rng.standard_normal((1, 4, 3, 3)))
        fused, phi, gamma = acm_fuse(F_S, F_C, block.acm)
        np.testing.assert_allclose(fused.data[:, :4], F_C.data * phi.data[..., None, None])
        np.testing.assert_allclose(fused.data[:, 4:], F_S.data * gamma.data[..., None, None])

    def test_fuse_shape_mismatch(self, rng):
        block = init_baaf(4, dtype=np.float64)
        with pytest.raises(ShapeMismatchError):
            acm_fuse(Tensor(np.ones((1, 4, 3, 3))), Tensor(np.ones((1, 4, 4, 4))), block.acm)


class TestBlocks:
    @pytest.mark.parametrize("channels", [4, 8, 32])
    def test_output_doubles_channels(self, channels, rng):
        block = init_baaf(channels, seed=rng, dtype=np.float64)
        out = baaf_forward(Tensor(rng.standard_normal((2, channels, 6, 6))), block)
        assert out.shape == (2, 2 * channels, 6, 6)

    def test_single_sample_input(self, rng):
        block = init_baaf(4, seed=rng, dtype=np.float64)
        out = baaf_forward(Tensor(rng.standard_normal((4, 5, 5))), block)
        assert out.shape == (8, 5, 5)

    def test_zero_weights_give_quarter_input(self, rng):
        x = Tensor(rng.standard_normal((2, 8, 4, 4)))
        out = baaf_forward(x, _zero_block(8))
        expected = 0.25 * np.concatenate([x.data, x.data], axis=1)
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_additive_fusion_keeps_channels(self, rng):
        block = init_baaf(8, seed=rng, with_acm=False, dtype=np.float64)
        x = Tensor(rng.standard_normal((2, 8, 4, 4)))
        assert pham_fuse_add(x, block).shape == (2, 8, 4, 4)

    def test_additive_fusion_with_zero_weights_is_identity(self, rng):
        x = Tensor(rng.standard_normal((1, 8, 4, 4)))
        np.testing.assert_allclose(pham_fuse_add(x, _zero_block(8)).data, x.data, atol=1e-12)

    def test_full_block_needs_calibration_head(self, rng):
        block = init_baaf(4, with_acm=False)
        with pytest.raises(ValueError):
            baaf_forward(Tensor(rng.standard_normal((1, 4, 3, 3))), block)
