"""
Differentiable tensor operations.

Every op computes its forward value with numpy and, when an operand is tracked,
records a backward closure on the operand's tape. Activations are laid out
N x C x H x W; ops on spatial maps also accept a single C x H x W sample.
"""

from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit
from scipy.special import softmax as _softmax

from baafseg.core.config import settings
from baafseg.core.error_handling import (
    DegenerateInputError,
    KernelConfigError,
    ShapeMismatchError,
)
from baafseg.tensor.tensor import BackwardFn, OpKind, Tensor

Operand = Union[Tensor, np.ndarray, float, int]


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class ElementwiseKind(str, Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"


class ActivationKind(str, Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    SIGMOID = "sigmoid"


class Padding(str, Enum):
    SAME = "same"
    VALID = "valid"


def as_tensor(value: Operand, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(value, dtype=dtype) if dtype is not None else value)


def record_op(op: OpKind, inputs: Sequence[Tensor], out: np.ndarray, backward_fn: BackwardFn) -> Tensor:
    for t in inputs:
        if t.tracked:
            return t.tape.record(op, inputs, out, backward_fn)
    return Tensor(out)


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that were broadcast to reach its shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise ---------------------------------------------------------------


def elementwise(kind: Union[ElementwiseKind, str], a: Operand, b: Operand) -> Tensor:
    """add / sub / mul with singleton-axis broadcasting of one operand onto the other."""
    kind = ElementwiseKind(kind)
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatchError(kind.value, a.shape, b.shape) from None
    if shape != a.shape and shape != b.shape:
        raise ShapeMismatchError(kind.value, a.shape, b.shape)

    x, y = a.data, b.data
    if kind is ElementwiseKind.ADD:
        out = x + y
    elif kind is ElementwiseKind.SUB:
        out = x - y
    else:
        out = x * y

    def backward_fn(g: np.ndarray):
        if kind is ElementwiseKind.ADD:
            return unbroadcast(g, x.shape), unbroadcast(g, y.shape)
        if kind is ElementwiseKind.SUB:
            return unbroadcast(g, x.shape), unbroadcast(-g, y.shape)
        return unbroadcast(g * y, x.shape), unbroadcast(g * x, y.shape)

    return record_op(OpKind(kind.value), (a, b), out, backward_fn)


def add(a: Operand, b: Operand) -> Tensor:
    return elementwise(ElementwiseKind.ADD, a, b)


def sub(a: Operand, b: Operand) -> Tensor:
    return elementwise(ElementwiseKind.SUB, a, b)


def mul(a: Operand, b: Operand) -> Tensor:
    return elementwise(ElementwiseKind.MUL, a, b)


# -- activations ---------------------------------------------------------------


def activation(
    kind: Union[ActivationKind, str], x: Tensor, slope: Optional[float] = None
) -> Tensor:
    kind = ActivationKind(kind)
    d = x.data
    if kind is ActivationKind.RELU:
        out = np.maximum(d, 0).astype(d.dtype, copy=False)

        def backward_fn(g: np.ndarray):
            return (g * (d > 0),)

    elif kind is ActivationKind.LEAKY_RELU:
        slope = settings.LEAKY_SLOPE if slope is None else slope
        positive = d >= 0
        out = np.where(positive, d, slope * d).astype(d.dtype, copy=False)

        def backward_fn(g: np.ndarray):
            return (np.where(positive, g, slope * g),)

    else:
        # expit branches on the sign of x internally, so large |x| never overflows
        out = expit(d).astype(d.dtype, copy=False)

        def backward_fn(g: np.ndarray):
            return (g * out * (1 - out),)

    return record_op(OpKind(kind.value), (x,), out, backward_fn)


def relu(x: Tensor) -> Tensor:
    return activation(ActivationKind.RELU, x)


def leaky_relu(x: Tensor, slope: Optional[float] = None) -> Tensor:
    return activation(ActivationKind.LEAKY_RELU, x, slope)


def sigmoid(x: Tensor) -> Tensor:
    return activation(ActivationKind.SIGMOID, x)


# -- linear layers -------------------------------------------------------------


def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``W @ x (+ b)`` over the last axis of ``x``; ``weight`` is c_out x c_in."""
    if weight.ndim != 2 or x.shape[-1:] != weight.shape[1:]:
        raise ShapeMismatchError("dense", x.shape, weight.shape)
    if bias is not None and bias.shape != weight.shape[:1]:
        raise ShapeMismatchError("dense bias", bias.shape, weight.shape[:1])

    xd, w = x.data, weight.data
    out = xd @ w.T
    if bias is not None:
        out = out + bias.data

    def backward_fn(g: np.ndarray):
        g2 = g.reshape(-1, w.shape[0])
        x2 = xd.reshape(-1, w.shape[1])
        gx = g @ w
        gw = g2.T @ x2
        gb = g2.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record_op(OpKind.DENSE, inputs, out, backward_fn)


def _same_pads(size: int, k: int, stride: int) -> Tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, total // 2, total - total // 2


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: Union[Padding, str] = Padding.SAME,
) -> Tensor:
    """2-D cross-correlation (no kernel flip), zero padding for ``same``."""
    padding = Padding(padding)
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3] or kernel.shape[2] not in (1, 3):
        raise KernelConfigError(f"conv2d: unsupported kernel shape {kernel.shape}")
    if stride not in (1, 2):
        raise KernelConfigError(f"conv2d: unsupported stride {stride}")
    if x.ndim not in (3, 4):
        raise ShapeMismatchError("conv2d", x.shape, kernel.shape)
    squeeze = x.ndim == 3
    xd = x.data[None] if squeeze else x.data
    n, c, h, w = xd.shape
    c_out, c_in, k, _ = kernel.shape
    if c != c_in:
        raise ShapeMismatchError("conv2d", x.shape, kernel.shape)
    if bias is not None and bias.shape != (c_out,):
        raise ShapeMismatchError("conv2d bias", bias.shape, (c_out,))
    if h < 1 or w < 1:
        raise DegenerateInputError(f"conv2d: empty spatial size {(h, w)}")

    if padding is Padding.SAME:
        ho, top, bottom = _same_pads(h, k, stride)
        wo, left, right = _same_pads(w, k, stride)
    else:
        if h < k or w < k:
            raise DegenerateInputError(f"conv2d: input {(h, w)} smaller than kernel {k}")
        ho, wo = (h - k) // stride + 1, (w - k) // stride + 1
        top = bottom = left = right = 0

    xp = np.pad(xd, ((0, 0), (0, 0), (top, bottom), (left, right)))
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
    kd = kernel.data
    out = np.moveaxis(np.tensordot(windows, kd, axes=([1, 4, 5], [1, 2, 3])), -1, 1)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out, dtype=xd.dtype)
    if squeeze:
        out = out[0]

    def backward_fn(g: np.ndarray):
        gd = g[None] if squeeze else g
        gk = np.tensordot(gd, windows, axes=([0, 2, 3], [0, 2, 3]))
        gb = gd.sum(axis=(0, 2, 3)) if bias is not None else None
        gcols = np.tensordot(gd, kd, axes=([1], [0]))
        gxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                gxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += np.moveaxis(
                    gcols[..., i, j], -1, 1
                )
        gx = gxp[:, :, top : top + h, left : left + w]
        if squeeze:
            gx = gx[0]
        return gx, gk, gb

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return record_op(OpKind.CONV2D, inputs, out, backward_fn)


# -- resampling ----------------------------------------------------------------


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pool, stride 2; odd edges are padded with -inf.

    The gradient goes to the first maximal element of each window in row-major
    order.
    """
    d = x.data
    h, w = d.shape[-2:]
    if h < 2 or w < 2:
        raise DegenerateInputError(f"maxpool2: spatial size {(h, w)} is below 2x2")
    ho, wo = -(-h // 2), -(-w // 2)
    ph, pw = 2 * ho - h, 2 * wo - w
    if ph or pw:
        d = np.pad(d, [(0, 0)] * (d.ndim - 2) + [(0, ph), (0, pw)], constant_values=-np.inf)
    lead = d.shape[:-2]
    flat = d.reshape(*lead, ho, 2, wo, 2).swapaxes(-3, -2).reshape(*lead, ho, wo, 4)
    idx = flat.argmax(axis=-1)[..., None]
    out = np.take_along_axis(flat, idx, axis=-1)[..., 0]

    def backward_fn(g: np.ndarray):
        gflat = np.zeros(flat.shape, dtype=g.dtype)
        np.put_along_axis(gflat, idx, g[..., None], axis=-1)
        gx = gflat.reshape(*lead, ho, wo, 2, 2).swapaxes(-3, -2).reshape(*lead, 2 * ho, 2 * wo)
        return (gx[..., :h, :w],)

    return record_op(OpKind.MAXPOOL2, (x,), out, backward_fn)


def upsample_nearest2(x: Tensor) -> Tensor:
    d = x.data
    h, w = d.shape[-2:]
    out = np.repeat(np.repeat(d, 2, axis=-2), 2, axis=-1)

    def backward_fn(g: np.ndarray):
        return (g.reshape(*g.shape[:-2], h, 2, w, 2).sum(axis=(-3, -1)),)

    return record_op(OpKind.UPSAMPLE2, (x,), out, backward_fn)


# -- channel plumbing ----------------------------------------------------------


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack ``a`` then ``b`` along the channel axis (third from last)."""
    if a.ndim < 3 or a.ndim != b.ndim or a.shape[:-3] != b.shape[:-3] or a.shape[-2:] != b.shape[-2:]:
        raise ShapeMismatchError("concat_channels", a.shape, b.shape)
    c1 = a.shape[-3]
    out = np.concatenate([a.data, b.data], axis=-3)

    def backward_fn(g: np.ndarray):
        return g[..., :c1, :, :], g[..., c1:, :, :]

    return record_op(OpKind.CONCAT, (a, b), out, backward_fn)


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean: ``(..., C, H, W) -> (..., C)``."""
    if x.ndim < 3:
        raise ShapeMismatchError("global_avg_pool", x.shape)
    h, w = x.shape[-2:]
    out = x.data.mean(axis=(-2, -1))

    def backward_fn(g: np.ndarray):
        spread = np.broadcast_to(g[..., None, None] / (h * w), x.shape)
        return (np.array(spread, dtype=x.dtype),)

    return record_op(OpKind.GAP, (x,), out, backward_fn)


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: Union[Mode, str] = Mode.EVAL,
    eps: Optional[float] = None,
    momentum: Optional[float] = None,
) -> Tensor:
    """Per-channel batch normalization over N x H x W.

    In train mode the running statistics are updated in place as
    ``running = momentum * running + (1 - momentum) * batch``.
    """
    mode = Mode(mode)
    eps = settings.BN_EPSILON if eps is None else eps
    momentum = settings.BN_MOMENTUM if momentum is None else momentum
    if x.ndim != 4 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeMismatchError("batchnorm", x.shape, gamma.shape, beta.shape)

    d = x.data
    axes = (0, 2, 3)
    m = d.shape[0] * d.shape[2] * d.shape[3]
    g_ = gamma.data[None, :, None, None]

    if mode is Mode.TRAIN:
        if m < 2:
            raise DegenerateInputError(f"batchnorm: {m} value(s) per channel in train mode")
        mean = d.mean(axis=axes)
        var = d.var(axis=axes)
        running_mean *= momentum
        running_mean += (1 - momentum) * mean
        running_var *= momentum
        running_var += (1 - momentum) * var * (m / (m - 1))
    else:
        mean, var = running_mean, running_var

    inv_std = (1.0 / np.sqrt(var + eps)).astype(d.dtype)
    xhat = (d - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = (g_ * xhat + beta.data[None, :, None, None]).astype(d.dtype, copy=False)

    def backward_fn(g: np.ndarray):
        ggamma = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        dxhat = g * g_
        if mode is Mode.TRAIN:
            gx = (inv_std[None, :, None, None] / m) * (
                m * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
            )
        else:
            gx = dxhat * inv_std[None, :, None, None]
        return gx, ggamma, gbeta

    return record_op(OpKind.BATCHNORM, (x, gamma, beta), out, backward_fn)


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    src = x.shape
    out = x.data.reshape(shape)

    def backward_fn(g: np.ndarray):
        return (g.reshape(src),)

    return record_op(OpKind.RESHAPE, (x,), out, backward_fn)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` (scipy subtracts the running max before exponentiating)."""
    out = _softmax(x.data, axis=axis).astype(x.dtype, copy=False)

    def backward_fn(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record_op(OpKind.SOFTMAX, (x,), out, backward_fn)


def select(x: Tensor, index: int, axis: int) -> Tensor:
    """Take one slice along ``axis``, dropping that axis."""
    out = np.take(x.data, index, axis=axis)

    def backward_fn(g: np.ndarray):
        gx = np.zeros(x.shape, dtype=g.dtype)
        slicer = [slice(None)] * x.ndim
        slicer[axis] = index
        gx[tuple(slicer)] = g
        return (gx,)

    return record_op(OpKind.SELECT, (x,), out, backward_fn)


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum(), dtype=x.dtype)

    def backward_fn(g: np.ndarray):
        return (np.full(x.shape, g, dtype=x.dtype),)

    return record_op(OpKind.SUM, (x,), out, backward_fn)


def mean_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.mean(), dtype=x.dtype)
    n = x.size

    def backward_fn(g: np.ndarray):
        return (np.full(x.shape, g / n, dtype=x.dtype),)

    return record_op(OpKind.MEAN, (x,), out, backward_fn)
