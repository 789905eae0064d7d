"""
Per-image evaluation and mean ± std aggregation.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from baafseg.core.config import settings
from baafseg.core.error_handling import EmptyDatasetError
from baafseg.core.timing import Timer
from baafseg.data.sample import SegSample, stack
from baafseg.metrics.area import AREA_METRICS, area_metrics, as_bool_mask, confusion
from baafseg.metrics.boundary import BOUNDARY_METRICS, boundary_metrics
from baafseg.metrics.curves import CurveResult, curves
from baafseg.network.model import Model, predict

logger = logging.getLogger(__name__)

METRICS = AREA_METRICS + BOUNDARY_METRICS
REPORT_COLUMNS = ["id", *METRICS, "boundary_defined", "undefined_reason"]
DEFAULT_THRESHOLD = 0.5


@dataclass
class MetricReport:
    """Per-image rows plus their mean and population std.

    Boundary metrics are averaged over images where they are defined;
    ``excluded`` counts the rest.
    """

    per_image: pd.DataFrame
    mean: Dict[str, float]
    std: Dict[str, float]
    excluded: int = 0
    fold: Optional[str] = None
    curves: Optional[CurveResult] = field(default=None, repr=False)

    @property
    def count(self) -> int:
        return len(self.per_image)

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.mean, self.std], index=["mean", "std"], columns=METRICS)


def image_metrics(pred: np.ndarray, gt: np.ndarray, sample_id: str) -> dict:
    pred, gt = as_bool_mask(np.squeeze(pred), "pred"), as_bool_mask(np.squeeze(gt), "gt")
    row = {"id": sample_id, **area_metrics(confusion(pred, gt))}
    distances = boundary_metrics(pred, gt)
    for name, result in distances.items():
        row[name] = float(result)
    hd = distances["hd"]
    row["boundary_defined"] = hd.defined
    row["undefined_reason"] = hd.reason.value if hd.reason else ""
    return row


def aggregate(per_image: pd.DataFrame, fold: Optional[str] = None) -> MetricReport:
    if per_image.empty:
        raise EmptyDatasetError("Cannot aggregate an empty report")
    mean = {m: float(per_image[m].mean()) for m in METRICS}
    std = {m: float(per_image[m].std(ddof=0)) for m in METRICS}
    excluded = int((~per_image["boundary_defined"].astype(bool)).sum())
    return MetricReport(per_image=per_image, mean=mean, std=std, excluded=excluded, fold=fold)


def evaluate_masks(
    preds: Sequence[np.ndarray],
    gts: Sequence[np.ndarray],
    ids: Sequence[str],
    fold: Optional[str] = None,
    threads: Optional[int] = None,
) -> MetricReport:
    """Metrics for already-binarized predictions; rows keep the input order."""
    if not len(preds):
        raise EmptyDatasetError("No predictions to evaluate")
    threads = threads or settings.worker_threads
    jobs = list(zip(preds, gts, ids))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda job: image_metrics(*job), jobs))
    else:
        rows = [image_metrics(*job) for job in jobs]
    report = aggregate(pd.DataFrame(rows, columns=REPORT_COLUMNS), fold)
    if report.excluded:
        logger.warning(
            f"Boundary metrics undefined for {report.excluded} of {report.count} images",
            extra={"excluded": report.excluded, "fold": fold},
        )
    return report


def evaluate_probabilities(
    probs: np.ndarray,
    gts: np.ndarray,
    ids: Sequence[str],
    threshold: float = DEFAULT_THRESHOLD,
    fold: Optional[str] = None,
    with_curves: bool = False,
    threads: Optional[int] = None,
) -> MetricReport:
    """Binarize with ``p >= threshold`` as foreground, then evaluate."""
    report = evaluate_masks(list(probs >= threshold), list(gts), ids, fold, threads)
    if with_curves:
        report.curves = curves(list(probs), list(gts))
    return report


def evaluate(
    model: Model,
    samples: Sequence[SegSample],
    threshold: float = DEFAULT_THRESHOLD,
    batch_size: int = 4,
    fold: Optional[str] = None,
    with_curves: bool = False,
) -> MetricReport:
    images, masks = stack(samples, dtype=model.dtype)
    with Timer("evaluate", labels={"fold": str(fold)}):
        probs = predict(model, images, batch_size)
        report = evaluate_probabilities(
            probs, masks.astype(np.uint8), [s.id for s in samples], threshold, fold, with_curves
        )
    logger.info(
        f"Evaluated {report.count} images: dice {report.mean['dice']:.4f}",
        extra={"fold": fold, "dice": report.mean["dice"], "excluded": report.excluded},
    )
    return report


def format_mean_std(mean: float, std: float, percent: bool) -> str:
    scale = 100.0 if percent else 1.0
    if np.isnan(mean):
        return "n/a"
    return f"{mean * scale:.2f}±{std * scale:.2f}"


def summarize(reports: Sequence[MetricReport]) -> pd.DataFrame:
    """Mean ± std across reports, one row per metric.

    Area metrics are shown in percent and distances in pixels.
    """
    if not reports:
        raise EmptyDatasetError("No reports to summarize")
    rows: List[dict] = []
    for m in METRICS:
        values = np.array([r.mean[m] for r in reports], dtype=np.float64)
        values = values[~np.isnan(values)]
        mean = float(values.mean()) if values.size else float("nan")
        std = float(values.std()) if values.size else float("nan")
        rows.append(
            {
                "metric": m,
                "mean": mean,
                "std": std,
                "min": float(values.min()) if values.size else float("nan"),
                "max": float(values.max()) if values.size else float("nan"),
                "formatted": format_mean_std(mean, std, m in AREA_METRICS),
            }
        )
    return pd.DataFrame(rows)
