"""
Segmentation metrics: area overlap, boundary distances, curves and significance.
"""

from baafseg.metrics.area import AREA_METRICS, ConfusionCounts, area_metrics, as_bool_mask, confusion
from baafseg.metrics.boundary import (
    BOUNDARY_METRICS,
    BoundarySet,
    DistanceResult,
    UndefinedReason,
    abd,
    assd,
    boundary_metrics,
    extract_boundary,
    hausdorff,
)
from baafseg.metrics.curves import CURVE_COLUMNS, CurveResult, curves
from baafseg.metrics.evaluate import (
    METRICS,
    MetricReport,
    aggregate,
    evaluate,
    evaluate_masks,
    evaluate_probabilities,
    format_mean_std,
    image_metrics,
    summarize,
)
from baafseg.metrics.report import read_report, report_frame, write_curves, write_report
from baafseg.metrics.stats import WelchResult, welch_ttest

__all__ = [
    "AREA_METRICS",
    "BOUNDARY_METRICS",
    "BoundarySet",
    "CURVE_COLUMNS",
    "ConfusionCounts",
    "CurveResult",
    "DistanceResult",
    "METRICS",
    "MetricReport",
    "UndefinedReason",
    "WelchResult",
    "abd",
    "aggregate",
    "area_metrics",
    "as_bool_mask",
    "assd",
    "boundary_metrics",
    "confusion",
    "curves",
    "evaluate",
    "evaluate_masks",
    "evaluate_probabilities",
    "extract_boundary",
    "format_mean_std",
    "hausdorff",
    "image_metrics",
    "read_report",
    "report_frame",
    "summarize",
    "welch_ttest",
    "write_curves",
    "write_report",
]
