"""
CSV writers for metric reports and curves.
"""

from pathlib import Path
from typing import Union

import pandas as pd

from baafseg.metrics.curves import CurveResult
from baafseg.metrics.evaluate import METRICS, MetricReport


def report_frame(report: MetricReport) -> pd.DataFrame:
    """Per-image rows followed by ``mean`` and ``std`` summary rows."""
    summary = pd.DataFrame(
        [
            {"id": "mean", **report.mean, "boundary_defined": report.count - report.excluded},
            {"id": "std", **report.std, "boundary_defined": report.count - report.excluded},
        ]
    )
    frame = pd.concat([report.per_image, summary], ignore_index=True)
    return frame[report.per_image.columns]


def write_report(report: MetricReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report_frame(report).to_csv(path, index=False, float_format="%.10g")
    return path


def write_curves(result: CurveResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    result.points.to_csv(path, index=False, float_format="%.10g")
    return path


def read_report(path: Union[str, Path]) -> pd.DataFrame:
    """Per-image rows of a report CSV (summary rows dropped)."""
    frame = pd.read_csv(path, dtype={"id": str}, keep_default_na=False, na_values=[""])
    frame = frame[~frame["id"].isin(["mean", "std"])].reset_index(drop=True)
    for m in METRICS:
        frame[m] = frame[m].astype(float)
    return frame
