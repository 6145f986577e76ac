"""Crop and resample - hands detected regions to the segmentation network"""
import logging
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import DegenerateBox, InvalidVolume
from .volume import MODALITIES, Box3, Dims, MultiModalScan, Volume

logger = logging.getLogger(__name__)

MODES = {"trilinear": 1, "nearest": 0}


def _sample_positions(lo: int, hi: int, count: int) -> np.ndarray:
    """Align-corners positions: first and last samples sit on ``lo`` and ``hi``"""
    if count == 1:
        return np.array([(lo + hi) / 2.0])
    step = (hi - lo) / (count - 1)
    return lo + np.arange(count) * step


def resample_region(data: np.ndarray, box: Box3, out_dims: Sequence[int], mode: str = "trilinear") -> np.ndarray:
    """
    Resample the voxels inside ``box`` onto an ``out_dims`` grid

    Args:
        data: 3D array indexed [x, y, z]
        box: Inclusive region of ``data`` to sample
        out_dims: Output extents (W, H, D)
        mode: ``trilinear`` for intensities, ``nearest`` for labels

    Returns:
        Array of shape ``out_dims`` (float32 for trilinear, source dtype for nearest)
    """
    if mode not in MODES:
        raise InvalidVolume(f"resample mode must be one of {sorted(MODES)}, got {mode}")
    if len(out_dims) != 3 or min(out_dims) < 1:
        raise InvalidVolume(f"out_dims needs three extents >= 1, got {out_dims}")

    axes = [_sample_positions(a, b, n) for a, b, n in zip(box.min, box.max, out_dims)]
    if mode == "nearest":
        # round half up so that ties go the same way on every axis
        index = [np.clip(np.floor(p + 0.5).astype(np.int64), a, b) for p, a, b in zip(axes, box.min, box.max)]
        return data[np.ix_(*index)]

    grid = np.meshgrid(*axes, indexing="ij")
    sampled = ndimage.map_coordinates(
        data.astype(np.float64), grid, order=MODES[mode], mode="nearest", prefilter=False
    )
    return sampled.astype(np.float32)


def zscore(data: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance copy; a constant input maps to zeros"""
    data = data.astype(np.float32)
    mean = float(data.mean())
    std = float(data.std())
    if std == 0.0:
        return data - mean
    return (data - mean) / std


def crop_box(box: Box3, offset: int, dims: Dims) -> Box3:
    """Grow a detected box by ``offset`` on every side and clip it to the volume"""
    if not box.within(dims):
        raise InvalidVolume(f"box {box} lies outside volume dims {dims}")
    grown = box.grown(offset, dims)
    if min(grown.extent) < 1:
        raise DegenerateBox(f"grown box {grown} has zero extent")
    return grown


def crop_resize(scan: MultiModalScan, box: Box3, offset: int,
                out_dims: Sequence[int] = (64, 64, 64), mode: str = "trilinear") -> np.ndarray:
    """
    Cut the context-padded box out of every modality and resample it

    Args:
        scan: Source scan
        box: Detected region, inclusive voxel bounds
        offset: Context margin f added on both sides of every axis
        out_dims: Network patch extents (W, H, D)
        mode: Interpolation for the modality volumes

    Returns:
        float32 array of shape (4, W, H, D) in FLAIR, T1, T1c, T2 order
    """
    grown = crop_box(box, offset, scan.dims)
    channels = [
        resample_region(scan.modalities[name].data, grown, out_dims, mode).astype(np.float32)
        for name in MODALITIES
    ]
    return np.stack(channels)


def crop_resize_labels(labels: Volume, box: Box3, offset: int, out_dims: Sequence[int] = (64, 64, 64)) -> np.ndarray:
    """Label counterpart of crop_resize; always nearest so no new label values appear"""
    grown = crop_box(box, offset, labels.dims)
    return resample_region(labels.data, grown, out_dims, "nearest")


def paste_back(patch: np.ndarray, grown: Box3, dims: Dims) -> np.ndarray:
    """Nearest-resample a patch onto the grown box of a zero volume of ``dims``"""
    full = np.zeros(dims, dtype=patch.dtype)
    source = Box3.full(patch.shape)
    full[grown.slices()] = resample_region(patch, source, grown.extent, "nearest")
    return full

