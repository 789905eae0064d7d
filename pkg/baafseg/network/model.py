"""
U-shaped encoder-decoder built from a NetworkSpec.

The wiring is an ordered list of typed layer descriptors that ``forward``
interprets. Encoder stages are plain double convolutions separated by 2x2 max
pools. Each decoder stage upsamples (nearest x2 then a 3x3 conv to the stage
width), concatenates the encoder output of equal spatial size, applies a double
convolution and, for attention variants, the attention block; BAAF's 2C output
is projected back to the stage width by a 1x1 conv. A 1x1 conv and a sigmoid
produce the one-channel probability map.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from baafseg.attention.baaf import (
    BAAFBlockParams,
    baaf_forward_with_gates,
    init_baaf,
    pham_fuse_add_with_gates,
)
from baafseg.core.error_handling import ConfigError, InputSizeError
from baafseg.network.gates import GateRecord
from baafseg.schemas.network import NetworkSpec
from baafseg.tensor import ops
from baafseg.tensor.init import Seed, as_generator, he_uniform, ones, zeros
from baafseg.tensor.ops import Mode
from baafseg.tensor.params import ParameterStore
from baafseg.tensor.tensor import Tape, Tensor, get_default_dtype

logger = logging.getLogger(__name__)

MIN_WIDTH = 4


class LayerKind(str, Enum):
    ENCODER_BLOCK = "encoder_block"
    POOL = "pool"
    UPSAMPLE = "upsample"
    SKIP_CONCAT = "skip_concat"
    DECODER_BLOCK = "decoder_block"
    ATTENTION = "attention"
    PROJECTION = "projection"
    OUTPUT_HEAD = "output_head"


@dataclass(frozen=True)
class LayerDescriptor:
    kind: LayerKind
    name: str
    in_channels: int
    out_channels: int
    size: Tuple[int, int]
    skip: Optional[str] = None
    attention: Optional[str] = None


@dataclass
class Model:
    spec: NetworkSpec
    params: ParameterStore
    layers: List[LayerDescriptor] = field(default_factory=list)

    @property
    def dtype(self) -> np.dtype:
        return next(iter(self.params.items()))[1].value.dtype


def validate_spec(spec: NetworkSpec) -> None:
    """Raise ConfigError / InputSizeError when the network cannot be built."""
    expected = spec.variant.depth
    if len(spec.filters) != expected:
        raise ConfigError(
            f"{spec.variant.value} needs {expected} stage widths, got {len(spec.filters)}"
        )
    for f in spec.filters:
        if f % spec.divisor:
            raise ConfigError(f"divisor {spec.divisor} does not divide stage width {f}")
        if f // spec.divisor < MIN_WIDTH:
            raise ConfigError(
                f"stage width {f} / divisor {spec.divisor} is below the minimum of {MIN_WIDTH}"
            )
    step = 2**spec.pools
    h, w = spec.input_size
    if h % step or w % step:
        raise InputSizeError(
            f"input size {h}x{w} is not divisible by {step} ({spec.pools} down-samplings "
            f"for {spec.variant.value})"
        )


def _wire(spec: NetworkSpec) -> List[LayerDescriptor]:
    widths = spec.widths
    depth, pools = spec.depth, spec.pools
    size = tuple(spec.input_size)
    layers: List[LayerDescriptor] = []
    enc_sizes: Dict[str, Tuple[int, int]] = {}
    ch = spec.in_channels

    for s in range(pools + 1):
        if s > 0:
            size = (size[0] // 2, size[1] // 2)
            layers.append(LayerDescriptor(LayerKind.POOL, f"pool{s}", ch, ch, size))
        layers.append(LayerDescriptor(LayerKind.ENCODER_BLOCK, f"enc{s}", ch, widths[s], size))
        enc_sizes[f"enc{s}"] = size
        ch = widths[s]

    attention = spec.variant.attention
    for s in range(pools + 1, depth):
        width = widths[s]
        skip = f"enc{depth - 1 - s}"
        skip_width = widths[depth - 1 - s]
        size = (size[0] * 2, size[1] * 2)
        if enc_sizes[skip] != size:
            raise ConfigError(f"skip {skip} has size {enc_sizes[skip]}, decoder stage {s} has {size}")
        layers.append(LayerDescriptor(LayerKind.UPSAMPLE, f"dec{s}.up", ch, width, size))
        layers.append(
            LayerDescriptor(LayerKind.SKIP_CONCAT, f"dec{s}.skip", width, width + skip_width, size, skip=skip)
        )
        layers.append(LayerDescriptor(LayerKind.DECODER_BLOCK, f"dec{s}", width + skip_width, width, size))
        if attention == "pham":
            layers.append(
                LayerDescriptor(LayerKind.ATTENTION, f"dec{s}.attn", width, width, size, attention=attention)
            )
        elif attention == "baaf":
            layers.append(
                LayerDescriptor(
                    LayerKind.ATTENTION, f"dec{s}.attn", width, 2 * width, size, attention=attention
                )
            )
            layers.append(LayerDescriptor(LayerKind.PROJECTION, f"dec{s}.proj", 2 * width, width, size))
        ch = width

    layers.append(LayerDescriptor(LayerKind.OUTPUT_HEAD, "head", ch, spec.out_channels, size))
    return layers


def _add_conv(store: ParameterStore, rng, name: str, c_in: int, c_out: int, k: int, dtype) -> None:
    store.add(f"{name}.weight", he_uniform(rng, (c_out, c_in, k, k), c_in * k * k, dtype))
    store.add(f"{name}.bias", zeros((c_out,), dtype))


def _add_bn(store: ParameterStore, name: str, channels: int, dtype) -> None:
    store.add(f"{name}.gamma", ones((channels,), dtype))
    store.add(f"{name}.beta", zeros((channels,), dtype))
    store.add(f"{name}.running_mean", zeros((channels,), dtype), trainable=False)
    store.add(f"{name}.running_var", ones((channels,), dtype), trainable=False)


def build(spec: NetworkSpec, seed: Seed = 0, dtype: Optional[np.dtype] = None) -> Model:
    """Instantiate the wiring and parameters; deterministic for a fixed seed."""
    validate_spec(spec)
    dtype = np.dtype(dtype or get_default_dtype())
    rng = as_generator(seed)
    layers = _wire(spec)

    pools = sum(1 for layer in layers if layer.kind is LayerKind.POOL)
    ups = sum(1 for layer in layers if layer.kind is LayerKind.UPSAMPLE)
    if pools != spec.pools or ups != spec.pools:
        raise ConfigError(f"wiring has {pools} pools and {ups} upsamples, expected {spec.pools}")

    store = ParameterStore()
    for layer in layers:
        if layer.kind in (LayerKind.ENCODER_BLOCK, LayerKind.DECODER_BLOCK):
            _add_conv(store, rng, f"{layer.name}.conv1", layer.in_channels, layer.out_channels, 3, dtype)
            _add_bn(store, f"{layer.name}.bn1", layer.out_channels, dtype)
            _add_conv(store, rng, f"{layer.name}.conv2", layer.out_channels, layer.out_channels, 3, dtype)
            _add_bn(store, f"{layer.name}.bn2", layer.out_channels, dtype)
        elif layer.kind is LayerKind.UPSAMPLE:
            _add_conv(store, rng, layer.name, layer.in_channels, layer.out_channels, 3, dtype)
        elif layer.kind is LayerKind.ATTENTION:
            block = init_baaf(
                layer.in_channels,
                spec.reduction,
                rng,
                spec.channel_reduction,
                with_acm=layer.attention == "baaf",
                dtype=dtype,
            )
            for path, value in block.arrays(layer.name).items():
                store.add(path, value)
        elif layer.kind in (LayerKind.PROJECTION, LayerKind.OUTPUT_HEAD):
            _add_conv(store, rng, layer.name, layer.in_channels, layer.out_channels, 1, dtype)

    model = Model(spec=spec, params=store, layers=layers)
    logger.info(
        f"Built {spec.variant.value} network with {count_parameters(model)} parameters",
        extra={"variant": spec.variant.value, "divisor": spec.divisor, "input_size": spec.input_size},
    )
    return model


def count_parameters(model: Model) -> int:
    return model.params.count(trainable_only=True)


def _double_conv(
    x: Tensor, tensors: Dict[str, Tensor], store: ParameterStore, name: str, mode: Mode
) -> Tensor:
    for i in (1, 2):
        x = ops.conv2d(x, tensors[f"{name}.conv{i}.weight"], tensors[f"{name}.conv{i}.bias"])
        x = ops.batchnorm(
            x,
            tensors[f"{name}.bn{i}.gamma"],
            tensors[f"{name}.bn{i}.beta"],
            store[f"{name}.bn{i}.running_mean"],
            store[f"{name}.bn{i}.running_var"],
            mode,
        )
        x = ops.leaky_relu(x)
    return x


def forward(
    model: Model,
    batch: Union[Tensor, np.ndarray],
    mode: Union[Mode, str] = Mode.EVAL,
    tape: Optional[Tape] = None,
    gates: Optional[List[GateRecord]] = None,
    overrides: Optional[Dict[str, Tensor]] = None,
) -> Tensor:
    """N x 1 x H x W images to N x 1 x H x W probabilities.

    In train mode a tape is created when none is given, every trainable
    parameter is watched on it, batch statistics are used and the batch-norm
    running statistics are updated. The tape is reachable as ``output.tape``.
    ``overrides`` replaces bound parameters by path; when given, no tape is
    created and gradients flow to whatever tape the overrides live on.
    """
    mode = Mode(mode)
    x = batch if isinstance(batch, Tensor) else Tensor(np.asarray(batch, dtype=model.dtype))
    expected = (model.spec.in_channels, *model.spec.input_size)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise InputSizeError(f"batch shape {x.shape} does not match network input N x {expected}")

    if mode is Mode.TRAIN and tape is None and overrides is None:
        tape = Tape()
    tensors = model.params.bind(tape)
    tensors.update(overrides or {})
    spec = model.spec
    skips: Dict[str, Tensor] = {}

    for layer in model.layers:
        if layer.kind is LayerKind.ENCODER_BLOCK:
            x = _double_conv(x, tensors, model.params, layer.name, mode)
            skips[layer.name] = x
        elif layer.kind is LayerKind.POOL:
            x = ops.maxpool2(x)
        elif layer.kind is LayerKind.UPSAMPLE:
            x = ops.conv2d(
                ops.upsample_nearest2(x), tensors[f"{layer.name}.weight"], tensors[f"{layer.name}.bias"]
            )
        elif layer.kind is LayerKind.SKIP_CONCAT:
            x = ops.concat_channels(skips[layer.skip], x)
        elif layer.kind is LayerKind.DECODER_BLOCK:
            x = _double_conv(x, tensors, model.params, layer.name, mode)
        elif layer.kind is LayerKind.ATTENTION:
            block = BAAFBlockParams.from_tensors(tensors, layer.name, spec.reduction, spec.channel_reduction)
            if layer.attention == "baaf":
                x, snapshot = baaf_forward_with_gates(x, block)
            else:
                x, snapshot = pham_fuse_add_with_gates(x, block)
            if gates is not None:
                gates.append(GateRecord(layer.name, snapshot))
        elif layer.kind is LayerKind.PROJECTION:
            x = ops.conv2d(x, tensors[f"{layer.name}.weight"], tensors[f"{layer.name}.bias"])
        elif layer.kind is LayerKind.OUTPUT_HEAD:
            x = ops.sigmoid(ops.conv2d(x, tensors[f"{layer.name}.weight"], tensors[f"{layer.name}.bias"]))
    return x


def predict(
    model: Model,
    images: np.ndarray,
    batch_size: int = 4,
    gates: Optional[List[GateRecord]] = None,
) -> np.ndarray:
    """Eval-mode probabilities for an N x 1 x H x W array, in fixed-size chunks."""
    chunks = [
        forward(model, images[start : start + batch_size], Mode.EVAL, gates=gates).data
        for start in range(0, len(images), batch_size)
    ]
    return np.concatenate(chunks, axis=0)
