"""Volume core - voxel data model, VVL1 files, regions and resampling"""
from .volume import MODALITIES, LEGAL_LABELS, Volume, MultiModalScan, RegionMasks, Box3
from .vvl import read_volume, write_volume, read_meta, write_meta, convert_raw, load_raw_specs
from .regions import decompose_regions, bbox_of_mask
from .resample import crop_resize, crop_resize_labels, paste_back, zscore
from .synthetic import make_synthetic_scan, make_synthetic_dataset

__all__ = [
    "MODALITIES",
    "LEGAL_LABELS",
    "Volume",
    "MultiModalScan",
    "RegionMasks",
    "Box3",
    "read_volume",
    "write_volume",
    "read_meta",
    "write_meta",
    "convert_raw",
    "load_raw_specs",
    "decompose_regions",
    "bbox_of_mask",
    "crop_resize",
    "crop_resize_labels",
    "paste_back",
    "zscore",
    "make_synthetic_scan",
    "make_synthetic_dataset",
]
