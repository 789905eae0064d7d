"""
K-fold cross-validation: one model per fold, evaluated on the held-out fold.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import pandas as pd

from baafseg.core.timing import Timer
from baafseg.data.sample import SegSample
from baafseg.metrics.evaluate import MetricReport, evaluate, summarize
from baafseg.network.model import build
from baafseg.schemas.network import NetworkSpec
from baafseg.schemas.training import TrainConfig
from baafseg.training.folds import FoldPlan, kfold_split
from baafseg.training.trainer import TrainResult, fit

logger = logging.getLogger(__name__)


@dataclass
class FoldResult:
    fold: int
    train: TrainResult
    report: MetricReport


@dataclass
class CrossValResult:
    plan: FoldPlan
    folds: List[FoldResult]
    summary: pd.DataFrame

    @property
    def reports(self) -> List[MetricReport]:
        return [f.report for f in self.folds]


def cross_validate(
    spec: NetworkSpec,
    samples: Sequence[SegSample],
    config: TrainConfig,
    k: int,
    plan: Optional[FoldPlan] = None,
    with_curves: bool = False,
) -> CrossValResult:
    """Train on the complement of each fold and evaluate on the fold.

    Pass ``plan`` to share one partition across runs; otherwise it is drawn from
    ``config.seed``. Fold ``i`` builds its model from seed ``[config.seed, i]``.
    """
    plan = plan or kfold_split(len(samples), k, config.seed)
    folds: List[FoldResult] = []
    for i in range(plan.k):
        label = f"fold{i}"
        with Timer("fold", labels={"fold": label, "variant": spec.variant.value}, level=logging.INFO):
            model = build(spec, seed=[config.seed, i])
            train = fit(model, [samples[j] for j in plan.train_indices(i)], config)
            report = evaluate(
                train.model,
                [samples[j] for j in plan.test_indices(i)],
                config.threshold,
                config.batch_size,
                fold=label,
                with_curves=with_curves,
            )
        folds.append(FoldResult(fold=i, train=train, report=report))

    summary = summarize([f.report for f in folds])
    logger.info(
        f"Cross-validation of {spec.variant.value} over {plan.k} folds: "
        f"dice {summary.set_index('metric').loc['dice', 'formatted']}",
        extra={"variant": spec.variant.value, "k": plan.k},
    )
    return CrossValResult(plan=plan, folds=folds, summary=summary)
