"""
Dense tensors with a minimal reverse-mode autodiff engine.
"""

from baafseg.tensor.gradcheck import GradCheckReport, grad_check, project
from baafseg.tensor.ops import (
    ActivationKind,
    ElementwiseKind,
    Mode,
    Padding,
    activation,
    add,
    batchnorm,
    concat_channels,
    conv2d,
    dense,
    elementwise,
    global_avg_pool,
    leaky_relu,
    maxpool2,
    mean_all,
    mul,
    relu,
    reshape,
    select,
    sigmoid,
    softmax,
    sub,
    sum_all,
    upsample_nearest2,
)
from baafseg.tensor.params import Parameter, ParameterStore
from baafseg.tensor.tensor import (
    OpKind,
    Tape,
    TapeNode,
    Tensor,
    backward,
    corrupt_backward,
    default_dtype,
    get_default_dtype,
)

__all__ = [
    "ActivationKind",
    "ElementwiseKind",
    "GradCheckReport",
    "Mode",
    "OpKind",
    "Padding",
    "Parameter",
    "ParameterStore",
    "Tape",
    "TapeNode",
    "Tensor",
    "activation",
    "add",
    "backward",
    "batchnorm",
    "concat_channels",
    "conv2d",
    "corrupt_backward",
    "default_dtype",
    "dense",
    "elementwise",
    "get_default_dtype",
    "global_avg_pool",
    "grad_check",
    "leaky_relu",
    "maxpool2",
    "mean_all",
    "mul",
    "project",
    "relu",
    "reshape",
    "select",
    "sigmoid",
    "softmax",
    "sub",
    "sum_all",
    "upsample_nearest2",
]
