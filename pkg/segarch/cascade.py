"""Cascaded inference - detect the tumor box, segment the context-padded patch, paste back"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import torch

from autonet.checkpoint import Checkpoint
from utils.config import RunConfig
from volcore.resample import crop_box, crop_resize, paste_back
from volcore.volume import Box3, Dims, MultiModalScan, Volume
from .detector import Detector, detect_box, detector_from_checkpoint
from .errors import NoDetection
from .segnet import SegNet, segnet_from_checkpoint
from .training import normalize_patch, predict_patch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CascadeResult:
    labels: Volume
    detected: Optional[Box3]
    grown: Box3

    @property
    def fell_back(self) -> bool:
        return self.detected is None


def _detector(net: Union[Detector, Checkpoint]) -> Detector:
    net = detector_from_checkpoint(net) if isinstance(net, Checkpoint) else net
    return net.eval()


def _segnet(net: Union[SegNet, Checkpoint]) -> SegNet:
    net = segnet_from_checkpoint(net) if isinstance(net, Checkpoint) else net
    return net.eval()


def whole_z(box: Box3, dims: Dims, min_slices: int) -> Box3:
    """Widen ``box`` to every axial slice when it spans fewer than ``min_slices``"""
    if box.extent[2] >= min_slices:
        return box
    return Box3((box.min[0], box.min[1], 0), (box.max[0], box.max[1], dims[2] - 1))


def run_cascade(scan: MultiModalScan, detector: Union[Detector, Checkpoint], segnet: Union[SegNet, Checkpoint],
                config: RunConfig) -> CascadeResult:
    """
    Detection then segmentation for one scan

    Args:
        scan: Input scan; labels, if present, are ignored
        detector: Trained detector or its checkpoint
        segnet: Trained segmentation network or its checkpoint
        config: scales, window_size, f_offset and min_box_slices

    Returns:
        CascadeResult with a full-size uint8 label volume; voxels outside the
            grown box are background
    """
    detector, segnet = _detector(detector), _segnet(segnet)
    try:
        box = detect_box(detector, scan, config)
    except NoDetection as e:
        logger.warning(f"{type(e).__name__}: {e}, segmenting the whole volume")
        box = None
    if box is None:
        source = Box3.full(scan.dims)
    else:
        source = whole_z(box, scan.dims, config.min_box_slices)
        if source != box:
            logger.info(f"Scan {scan.scan_id}: box spans {box.extent[2]} slices, widened to the full z range")
    grown = crop_box(source, config.f_offset, scan.dims)
    patch_dims = segnet.cfg.patch_dims
    patch = normalize_patch(crop_resize(scan, source, config.f_offset, patch_dims))
    labels = predict_patch(segnet, patch)
    full = paste_back(labels.astype(np.uint8), grown, scan.dims)
    logger.info(f"Scan {scan.scan_id}: {int(np.count_nonzero(full))} tumor voxels inside {grown}")
    return CascadeResult(Volume(full, scan.spacing), box, grown)


def infer_cascade(scan: MultiModalScan, detector: Union[Detector, Checkpoint], segnet: Union[SegNet, Checkpoint],
                  config: RunConfig) -> Volume:
    with torch.no_grad():
        return run_cascade(scan, detector, segnet, config).labels
