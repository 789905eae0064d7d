"""
Gradient checks for every registered op plus the attention-block invariants.

Each tape op has exactly one check. Composite checks (the BAAF and PHAM blocks,
a toy network) and the gate invariants run after them.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from baafseg.attention.baaf import (
    BAAFBlockParams,
    baaf_forward,
    baaf_forward_with_gates,
    init_baaf,
    pham_fuse_add,
)
from baafseg.core.timing import Timer
from baafseg.network.model import build, forward
from baafseg.schemas.network import NetworkSpec, Variant
from baafseg.tensor import ops
from baafseg.tensor.gradcheck import grad_check, project
from baafseg.tensor.ops import Mode
from baafseg.tensor.tensor import OpKind, Tensor, corrupt_backward, default_dtype
from baafseg.training.loss import bce_loss

logger = logging.getLogger(__name__)

OP_TOLERANCE = 1e-4
NETWORK_TOLERANCE = 1e-3
RESULT_COLUMNS = ["check", "kind", "max_rel_error", "tolerance", "passed", "detail"]

Builder = Callable[[Dict[str, Tensor]], Tensor]
Case = Tuple[Builder, Dict[str, np.ndarray]]


@dataclass
class SelfTestReport:
    results: pd.DataFrame

    @property
    def passed(self) -> bool:
        return bool(self.results["passed"].all())

    @property
    def failing(self) -> List[str]:
        return self.results.loc[~self.results["passed"], "check"].tolist()


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    """Values with |x| in [0.1, 1] so kinks at zero are never crossed."""
    return rng.uniform(0.1, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def _distinct(rng: np.random.Generator, shape) -> np.ndarray:
    n = int(np.prod(shape))
    return (rng.permutation(n).reshape(shape) / n).astype(np.float64)


def _batchnorm_case(rng: np.random.Generator) -> Case:
    def build_bn(t):
        running_mean, running_var = np.zeros(3), np.ones(3)
        return project(ops.batchnorm(t["x"], t["gamma"], t["beta"], running_mean, running_var, Mode.TRAIN))

    return build_bn, {
        "x": rng.standard_normal((4, 3, 3, 3)),
        "gamma": rng.uniform(0.5, 1.5, 3),
        "beta": rng.standard_normal(3),
    }


def op_cases(seed: int = 0) -> Dict[OpKind, Case]:
    """One gradient-check case per differentiable op, in float64."""
    rng = np.random.default_rng(seed)
    target = (rng.uniform(size=(2, 1, 3, 3)) > 0.5).astype(np.float64)
    return {
        OpKind.ADD: (
            lambda t: project(ops.add(t["a"], t["b"])),
            {"a": rng.standard_normal((2, 3, 4, 4)), "b": rng.standard_normal((3, 1, 1))},
        ),
        OpKind.SUB: (
            lambda t: project(ops.sub(t["a"], t["b"])),
            {"a": rng.standard_normal((2, 3, 4, 4)), "b": rng.standard_normal((1, 4, 4))},
        ),
        OpKind.MUL: (
            lambda t: project(ops.mul(t["a"], t["b"])),
            {"a": rng.standard_normal((3, 4, 4)), "b": rng.standard_normal((3, 1, 1))},
        ),
        OpKind.RELU: (lambda t: project(ops.relu(t["x"])), {"x": _away_from_zero(rng, (2, 3, 4, 4))}),
        OpKind.LEAKY_RELU: (
            lambda t: project(ops.leaky_relu(t["x"])),
            {"x": _away_from_zero(rng, (2, 3, 4, 4))},
        ),
        OpKind.SIGMOID: (
            lambda t: project(ops.sigmoid(t["x"])),
            {"x": 3 * rng.standard_normal((2, 3, 4, 4))},
        ),
        OpKind.DENSE: (
            lambda t: project(ops.dense(t["x"], t["w"], t["b"])),
            {"x": rng.standard_normal((2, 5)), "w": rng.standard_normal((4, 5)), "b": rng.standard_normal(4)},
        ),
        OpKind.CONV2D: (
            lambda t: project(ops.conv2d(t["x"], t["k"], t["b"])),
            {
                "x": rng.standard_normal((2, 3, 6, 6)),
                "k": rng.standard_normal((4, 3, 3, 3)),
                "b": rng.standard_normal(4),
            },
        ),
        OpKind.MAXPOOL2: (lambda t: project(ops.maxpool2(t["x"])), {"x": _distinct(rng, (2, 3, 4, 4))}),
        OpKind.UPSAMPLE2: (
            lambda t: project(ops.upsample_nearest2(t["x"])),
            {"x": rng.standard_normal((2, 3, 3, 3))},
        ),
        OpKind.CONCAT: (
            lambda t: project(ops.concat_channels(t["a"], t["b"])),
            {"a": rng.standard_normal((2, 2, 3, 3)), "b": rng.standard_normal((2, 3, 3, 3))},
        ),
        OpKind.GAP: (
            lambda t: project(ops.global_avg_pool(t["x"])),
            {"x": rng.standard_normal((2, 3, 4, 4))},
        ),
        OpKind.BATCHNORM: _batchnorm_case(rng),
        OpKind.RESHAPE: (
            lambda t: project(ops.reshape(t["x"], (6, 4))),
            {"x": rng.standard_normal((2, 3, 4))},
        ),
        OpKind.SOFTMAX: (lambda t: project(ops.softmax(t["x"], axis=-1)), {"x": rng.standard_normal((2, 5))}),
        OpKind.SELECT: (
            lambda t: project(ops.select(t["x"], 1, axis=1)),
            {"x": rng.standard_normal((2, 3, 4))},
        ),
        OpKind.SUM: (lambda t: ops.sum_all(ops.mul(t["x"], t["x"])), {"x": rng.standard_normal((3, 4))}),
        OpKind.MEAN: (lambda t: ops.mean_all(ops.mul(t["x"], t["x"])), {"x": rng.standard_normal((3, 4))}),
        OpKind.BCE: (
            lambda t: bce_loss(t["p"], target),
            {"p": rng.uniform(0.05, 0.95, size=(2, 1, 3, 3))},
        ),
    }


def block_cases(seed: int = 0, channels: int = 8) -> Dict[str, Case]:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, channels, 4, 4))
    cases: Dict[str, Case] = {}
    for name, with_acm, fn in (("baaf_block", True, baaf_forward), ("pham_block", False, pham_fuse_add)):
        block = init_baaf(channels, seed=rng, with_acm=with_acm, dtype=np.float64)
        inputs = {"x": x, **block.arrays("blk")}

        def build_block(t, fn=fn):
            return project(fn(t["x"], BAAFBlockParams.from_tensors(t, "blk")))

        cases[name] = (build_block, inputs)
    return cases


def network_case(seed: int = 0) -> Case:
    """unet9 at 16 x 16, divisor 16, two samples, BCE against a random mask."""
    rng = np.random.default_rng(seed)
    spec = NetworkSpec(variant=Variant.UNET9, divisor=16, input_size=(16, 16))
    model = build(spec, seed=seed, dtype=np.float64)
    x = rng.uniform(size=(2, 1, 16, 16))
    y = (rng.uniform(size=(2, 1, 16, 16)) > 0.5).astype(np.float64)
    inputs = {path: value.copy() for path, value in model.params.trainable()}

    def build_net(t):
        return bce_loss(forward(model, x, Mode.TRAIN, overrides=t), y)

    return build_net, inputs


def gate_invariants(seed: int = 0, draws: int = 100, channel_set=(4, 8, 32)) -> List[dict]:
    """Gate ranges, softmax partition, channel doubling and the zero-weight fixed point."""
    rng = np.random.default_rng(seed)
    worst_sum, range_ok, shape_ok = 0.0, True, True
    for i in range(draws):
        c = channel_set[i % len(channel_set)]
        x = Tensor(rng.standard_normal((2, c, 4, 4)))
        block = init_baaf(c, seed=rng, dtype=np.float64)
        out, snap = baaf_forward_with_gates(x, block)
        worst_sum = max(worst_sum, float(np.abs(snap.phi + snap.gamma - 1.0).max()))
        range_ok &= bool((snap.alpha >= 0.5).all() and (snap.alpha < 1).all())
        range_ok &= bool((snap.beta > 0).all() and (snap.beta < 1).all())
        shape_ok &= out.shape == (2, 2 * c, 4, 4)

    c = 8
    x = Tensor(rng.standard_normal((1, c, 4, 4)))
    zero = init_baaf(c, dtype=np.float64)
    zero = BAAFBlockParams.from_tensors({k: Tensor(np.zeros_like(v)) for k, v in zero.arrays().items()})
    fixed = baaf_forward(x, zero).data
    expected = 0.25 * np.concatenate([x.data, x.data], axis=1)
    fixed_err = float(np.abs(fixed - expected).max())

    return [
        _row("phi_plus_gamma", "invariant", worst_sum, 1e-6, worst_sum <= 1e-6, "phi + gamma = 1"),
        _row("gate_ranges", "invariant", 0.0, 0.0, range_ok, "alpha in [0.5, 1), beta in (0, 1)"),
        _row("output_channels", "invariant", 0.0, 0.0, shape_ok, "output has 2C channels"),
        _row(
            "zero_weights", "invariant", fixed_err, 1e-12, fixed_err <= 1e-12,
            "zero weights give 0.25 F per half",
        ),
    ]


def _row(check: str, kind: str, err: float, tol: float, passed: bool, detail: str = "") -> dict:
    return {
        "check": check,
        "kind": kind,
        "max_rel_error": err,
        "tolerance": tol,
        "passed": bool(passed),
        "detail": detail,
    }


def run_selftest(
    corrupt: Optional[OpKind] = None,
    include_network: bool = True,
    seed: int = 0,
) -> SelfTestReport:
    """Run every check; ``corrupt`` scales one op's backward as a negative control."""
    rows: List[dict] = []
    with Timer("selftest", level=logging.INFO), default_dtype(np.float64):
        cases: Dict[str, Tuple[Case, float, Optional[int]]] = {
            op.value: (case, OP_TOLERANCE, None) for op, case in op_cases(seed).items()
        }
        for name, case in block_cases(seed).items():
            cases[name] = (case, OP_TOLERANCE, None)
        if include_network:
            cases["network"] = (network_case(seed), NETWORK_TOLERANCE, 60)

        for name, ((builder, inputs), tol, max_coords) in cases.items():
            if corrupt is not None:
                with corrupt_backward(corrupt):
                    report = grad_check(builder, inputs, tolerance=tol, max_coords=max_coords, seed=seed)
            else:
                report = grad_check(builder, inputs, tolerance=tol, max_coords=max_coords, seed=seed)
            detail = "" if report.passed else f"worst at {report.worst}"
            rows.append(_row(name, "gradient", report.max_rel_error, tol, report.passed, detail))

        rows.extend(gate_invariants(seed))

    result = SelfTestReport(pd.DataFrame(rows, columns=RESULT_COLUMNS))
    for check in result.failing:
        logger.error(f"Self-test check failed: {check}", extra={"check": check})
    return result
