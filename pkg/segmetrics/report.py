"""Per-scan evaluation reports, JSON emission and the aggregate CSV table"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from volcore.errors import DimsMismatch
from volcore.regions import decompose_regions
from volcore.volume import Volume
from .area import confusion_counts, dice, jaccard, precision, sensitivity, specificity
from .errors import EmptySurface
from .surface import KDTREE, assd, hausdorff, surface_voxels

logger = logging.getLogger(__name__)

REGIONS = ("WT", "TC", "ET")
METRICS = ("dice", "sensitivity", "specificity", "precision", "hausdorff", "assd")
FOOTER_ROWS = ("mean", "std")


@dataclass
class RegionReport:
    dice: float
    sensitivity: Optional[float]
    specificity: Optional[float]
    precision: Optional[float]
    jaccard: float
    hausdorff: Optional[float]
    assd: Optional[float]
    flags: List[str] = field(default_factory=list)


@dataclass
class ScanReport:
    scan_id: str
    regions: Dict[str, RegionReport]
    hausdorff_percentile: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "scan_id": self.scan_id,
            "hausdorff_percentile": self.hausdorff_percentile,
            "regions": {name: asdict(self.regions[name]) for name in REGIONS},
        }

    def row(self) -> Dict[str, Optional[float]]:
        """Flat ``<region>_<metric>`` cells for the aggregate table"""
        cells = {}
        for region in REGIONS:
            report = self.regions[region]
            for metric in METRICS:
                cells[f"{region}_{metric}"] = getattr(report, metric)
        return cells


def evaluate_region(pred_mask: Volume, truth_mask: Volume, spacing, percentile: Optional[float] = None,
                    method: str = KDTREE) -> RegionReport:
    counts = confusion_counts(pred_mask, truth_mask)
    flags = []
    sens, spec, prec = sensitivity(counts), specificity(counts), precision(counts)
    for name, value in (("sensitivity", sens), ("specificity", spec), ("precision", prec)):
        if value is None:
            flags.append(f"{name}_undefined")
    if counts.predicted == 0 and counts.actual == 0:
        flags.append("both_empty")

    hd = mean_distance = None
    try:
        pred_surface = surface_voxels(pred_mask, spacing)
        truth_surface = surface_voxels(truth_mask, spacing)
        hd = hausdorff(pred_surface, truth_surface, percentile, method)
        mean_distance = assd(pred_surface, truth_surface, method)
    except EmptySurface:
        flags.append("empty_surface")
    return RegionReport(dice(counts), sens, spec, prec, jaccard(counts), hd, mean_distance, flags)


def evaluate_scan(pred: Volume, truth: Volume, spacing=None, percentile: Optional[float] = None,
                  scan_id: str = "", method: str = KDTREE) -> ScanReport:
    """
    Six metrics for each of WT, TC and ET

    Args:
        pred: Predicted label volume (uint8, labels in {0, 1, 2, 4})
        truth: Ground truth label volume on the same grid
        spacing: Physical voxel spacing; the truth volume's when omitted
        percentile: Hausdorff percentile (None for the maximum)
        scan_id: Identifier carried into the report
        method: Nearest-surface search, ``kdtree`` or ``exhaustive``

    Returns:
        ScanReport; undefined metrics are None with a flag naming them
    """
    if pred.dims != truth.dims:
        raise DimsMismatch(f"scan {scan_id}: prediction dims {pred.dims} differ from truth dims {truth.dims}")
    spacing = truth.spacing if spacing is None else tuple(spacing)
    pred_regions = decompose_regions(pred)
    truth_regions = decompose_regions(truth)
    regions = {}
    for (name, pred_mask), (_, truth_mask) in zip(pred_regions.items(), truth_regions.items()):
        regions[name] = evaluate_region(pred_mask, truth_mask, spacing, percentile, method)
    logger.debug(f"Scan {scan_id}: WT dice {regions['WT'].dice:.4f}")
    return ScanReport(scan_id, regions, percentile)


def write_scan_json(report: ScanReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def aggregate_frame(reports: Sequence[ScanReport]) -> pd.DataFrame:
    """
    One row per scan (sorted by scan_id) with ``<region>_<metric>`` columns,
    followed by mean and population standard deviation rows over defined cells
    """
    ordered = sorted(reports, key=lambda r: r.scan_id)
    columns = [f"{region}_{metric}" for region in REGIONS for metric in METRICS]
    frame = pd.DataFrame([r.row() for r in ordered], columns=columns, dtype=np.float64)
    frame.index = pd.Index([r.scan_id for r in ordered], name="scan_id")
    footer = pd.DataFrame(
        [frame.mean(axis=0, skipna=True), frame.std(axis=0, skipna=True, ddof=0)],
        index=pd.Index(list(FOOTER_ROWS), name="scan_id"),
    )
    return pd.concat([frame, footer])


def write_aggregate_csv(reports: Sequence[ScanReport], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    aggregate_frame(reports).to_csv(path, float_format="%.6f", na_rep="")
    return path
