"""
Dense tensors and the tape that records their computation graph.

A ``Tensor`` wraps a numpy array. When at least one operand of an op is tracked
by a ``Tape``, the op appends a ``TapeNode`` holding a backward closure over the
forward values it needs. ``backward`` sweeps the tape from the loss node down to
node 0 and returns gradients for every watched leaf.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from baafseg.core.config import settings
from baafseg.core.error_handling import NonScalarLossError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_dtype_override: Optional[np.dtype] = None
_corrupted_ops: Dict["OpKind", float] = {}


class OpKind(str, Enum):
    """Operation tags recorded on tape nodes."""

    LEAF = "leaf"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    SIGMOID = "sigmoid"
    DENSE = "dense"
    CONV2D = "conv2d"
    MAXPOOL2 = "maxpool2"
    UPSAMPLE2 = "upsample_nearest2"
    CONCAT = "concat_channels"
    GAP = "global_avg_pool"
    BATCHNORM = "batchnorm"
    RESHAPE = "reshape"
    SOFTMAX = "softmax"
    SELECT = "select"
    SUM = "sum"
    MEAN = "mean"
    BCE = "bce"


def get_default_dtype() -> np.dtype:
    """Floating dtype used for new tensors (settings.DTYPE unless overridden)."""
    if _dtype_override is not None:
        return _dtype_override
    return np.dtype(settings.DTYPE)


@contextmanager
def default_dtype(dtype: Union[str, np.dtype]) -> Iterator[None]:
    """Temporarily switch the default dtype, e.g. to float64 for gradient checks."""
    global _dtype_override
    previous = _dtype_override
    _dtype_override = np.dtype(dtype)
    try:
        yield
    finally:
        _dtype_override = previous


@contextmanager
def corrupt_backward(op: OpKind, factor: float = 1.5) -> Iterator[None]:
    """Scale every gradient emitted by ``op`` by ``factor``.

    Only used as a negative control for the gradient checker.
    """
    _corrupted_ops[op] = factor
    try:
        yield
    finally:
        _corrupted_ops.pop(op, None)


class Tensor:
    """Dense N-dimensional array, optionally tracked on a tape."""

    __slots__ = ("data", "tape", "node_id")

    def __init__(
        self,
        data,
        tape: Optional["Tape"] = None,
        node_id: Optional[int] = None,
        dtype: Optional[Union[str, np.dtype]] = None,
    ):
        if dtype is None:
            arr = np.asarray(data)
            if not np.issubdtype(arr.dtype, np.floating):
                arr = arr.astype(get_default_dtype())
        else:
            arr = np.asarray(data, dtype=dtype)
        self.data: np.ndarray = arr
        self.tape = tape
        self.node_id = node_id

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def tracked(self) -> bool:
        return self.tape is not None and self.node_id is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __add__(self, other) -> "Tensor":
        from baafseg.tensor import ops

        return ops.add(self, other)

    def __sub__(self, other) -> "Tensor":
        from baafseg.tensor import ops

        return ops.sub(self, other)

    def __mul__(self, other) -> "Tensor":
        from baafseg.tensor import ops

        return ops.mul(self, other)

    __radd__ = __add__
    __rmul__ = __mul__

    def __repr__(self) -> str:
        tag = f", node={self.node_id}" if self.tracked else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"


@dataclass
class TapeNode:
    """One recorded operation."""

    node_id: int
    op: OpKind
    inputs: Tuple[Optional[int], ...]
    shape: Tuple[int, ...]
    dtype: np.dtype
    backward_fn: Optional[BackwardFn] = None
    grad: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def parent_ids(self) -> List[int]:
        return [i for i in self.inputs if i is not None]


class Tape:
    """Append-only record of a forward computation."""

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self.leaves: Dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def watch(self, data: Union[np.ndarray, Tensor], name: str) -> Tensor:
        """Register ``data`` as a named leaf whose gradient ``backward`` reports."""
        arr = data.data if isinstance(data, Tensor) else np.asarray(data)
        if name in self.leaves:
            raise ValueError(f"Leaf {name!r} is already watched on this tape")
        node = TapeNode(len(self.nodes), OpKind.LEAF, (), tuple(arr.shape), arr.dtype)
        self.nodes.append(node)
        self.leaves[name] = node.node_id
        return Tensor(arr, tape=self, node_id=node.node_id)

    def record(
        self,
        op: OpKind,
        inputs: Sequence[Tensor],
        out: np.ndarray,
        backward_fn: BackwardFn,
    ) -> Tensor:
        ids = tuple(t.node_id if t.tape is self else None for t in inputs)
        node = TapeNode(len(self.nodes), op, ids, tuple(out.shape), out.dtype, backward_fn)
        self.nodes.append(node)
        return Tensor(out, tape=self, node_id=node.node_id)


def backward(tape: Tape, loss: Union[Tensor, int]) -> Dict[str, np.ndarray]:
    """Reverse sweep from ``loss``; returns the gradient of every watched leaf.

    Nodes are visited in descending id order and each node's input gradients are
    accumulated in input order, so the summation order is fixed for a given tape.
    """
    loss_id = loss.node_id if isinstance(loss, Tensor) else int(loss)
    if loss_id is None:
        raise NonScalarLossError("Loss tensor is not tracked on the tape")
    root = tape.nodes[loss_id]
    if int(np.prod(root.shape)) != 1:
        raise NonScalarLossError(f"Loss must be scalar, got shape {root.shape}")

    for node in tape.nodes:
        node.grad = None
    root.grad = np.ones(root.shape, dtype=root.dtype)

    for node_id in range(loss_id, -1, -1):
        node = tape.nodes[node_id]
        if node.grad is None or node.backward_fn is None:
            continue
        input_grads = node.backward_fn(node.grad)
        scale = _corrupted_ops.get(node.op)
        for parent_id, g in zip(node.inputs, input_grads):
            if parent_id is None or g is None:
                continue
            if scale is not None:
                g = g * scale
            parent = tape.nodes[parent_id]
            if parent.grad is None:
                parent.grad = np.array(g, dtype=parent.dtype, copy=True).reshape(parent.shape)
            else:
                parent.grad += g.reshape(parent.shape)
        if node.op is not OpKind.LEAF:
            node.grad = None

    grads: Dict[str, np.ndarray] = {}
    for name, leaf_id in sorted(tape.leaves.items()):
        leaf = tape.nodes[leaf_id]
        if leaf.grad is None:
            logger.warning(
                f"Parameter {name} is disconnected from the loss; gradient is zero",
                extra={"parameter": name},
            )
            grads[name] = np.zeros(leaf.shape, dtype=leaf.dtype)
        else:
            grads[name] = leaf.grad
    return grads
