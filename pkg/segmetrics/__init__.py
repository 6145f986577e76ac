"""Segmentation metrics - overlap, surface distances and scan reports"""
from .area import (
    ConfusionCounts,
    confusion_counts,
    dice,
    sensitivity,
    specificity,
    precision,
    jaccard,
)
from .surface import SurfaceSet, surface_voxels, hausdorff, assd
from .report import RegionReport, ScanReport, evaluate_scan, write_scan_json, aggregate_frame, write_aggregate_csv

__all__ = [
    "ConfusionCounts",
    "confusion_counts",
    "dice",
    "sensitivity",
    "specificity",
    "precision",
    "jaccard",
    "SurfaceSet",
    "surface_voxels",
    "hausdorff",
    "assd",
    "RegionReport",
    "ScanReport",
    "evaluate_scan",
    "write_scan_json",
    "aggregate_frame",
    "write_aggregate_csv",
]
