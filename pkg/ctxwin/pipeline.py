"""Window generation over whole scans - ties scales, windows, proposals and labels together"""
import logging
import zlib
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from utils.config import RunConfig
from volcore.resample import zscore
from volcore.volume import MultiModalScan
from .errors import MissingLabels
from .geometry import Rect
from .groundtruth import slice_gt_rects
from .proposals import LabeledProposal, Proposal, ProposalSource, assign_proposal_labels
from .scales import ScaleSpec, build_scales, rect_to_scale, rescale_slice
from .windows import Window, enumerate_windows, negative_windows, positive_windows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SliceWindows:
    """Everything the detection stage produces for one slice at one scale"""

    slice_z: int
    scale: ScaleSpec
    image: np.ndarray  # (C, w_i, h_i)
    gt_boxes: List[Rect]
    positives: List[Window]
    negatives: List[Window]
    proposals: List[Proposal]
    labeled: List[LabeledProposal]


def derive_seed(seed: int, scan_id: str, slice_z: int, scale_id: int) -> int:
    """Per slice and scale seed; independent of the order scans are processed in"""
    sequence = np.random.SeedSequence([seed, zlib.crc32(scan_id.encode("utf-8")), slice_z, scale_id])
    return int(sequence.generate_state(1)[0])


def detection_volume(scan: MultiModalScan, modalities: Sequence[str]) -> np.ndarray:
    """Detector input channels, each z-scored over its whole volume: (C, nx, ny, nz)"""
    return np.stack([zscore(scan.modalities[name].data) for name in modalities])


def rescale_channels(image: np.ndarray, scale: ScaleSpec) -> np.ndarray:
    return np.stack([rescale_slice(channel, scale) for channel in image])


def slice_windows(image: np.ndarray, gt_rects: Sequence[Rect], scale: ScaleSpec, source: ProposalSource,
                  config: RunConfig, seed: int, slice_z: int) -> SliceWindows:
    """
    Windows and labeled proposals for one slice at one scale

    Args:
        image: (C, nx, ny) detector input at original resolution
        gt_rects: Ground truth at original resolution
        scale: Target scale
        source: Proposal source (oracle or trained detector)
        config: Window size, stride K, P and IoU threshold
        seed: Seed handed to the proposal source
        slice_z: Axial index of the slice

    Returns:
        SliceWindows on the scaled slice
    """
    scaled = rescale_channels(image, scale)
    gt = [rect_to_scale(r, scale) for r in gt_rects]
    positives = positive_windows(gt, scale.scaled_dims, scale.scale_id)
    proposals = source(scaled, gt, scale.scale_id, slice_z, seed)
    grid = enumerate_windows(scale.scaled_dims, tuple(config.window_size), config.K)
    negatives = negative_windows(proposals, positives, grid, config.min_proposals, scale.scale_id)
    labeled = assign_proposal_labels(proposals, gt, config.iou_threshold, positives + negatives)
    return SliceWindows(slice_z, scale, scaled, gt, positives, negatives, proposals, labeled)


def scan_windows(scan: MultiModalScan, config: RunConfig, source: ProposalSource,
                 slices: Optional[Sequence[int]] = None) -> List[SliceWindows]:
    """
    Run window generation over the axial slices of a labeled scan, scale by scale

    Negative mining runs independently per scale.
    """
    if scan.labels is None:
        raise MissingLabels(f"scan {scan.scan_id} has no label volume")
    nx, ny, nz = scan.dims
    volume = detection_volume(scan, config.detector_modalities)
    scales = build_scales((nx, ny), config.scales, tuple(config.window_size))
    if not scales:
        logger.warning(f"Scan {scan.scan_id}: no scale fits window {config.window_size}")

    results = []
    positives = 0
    for z in (range(nz) if slices is None else slices):
        gt = slice_gt_rects(scan.labels, z)
        for scale in scales:
            seed = derive_seed(config.seed, scan.scan_id, z, scale.scale_id)
            item = slice_windows(volume[:, :, :, z], gt, scale, source, config, seed, z)
            positives += len(item.positives)
            results.append(item)
    if positives == 0:
        logger.warning(f"Scan {scan.scan_id}: empty labels, no positive windows")
    logger.info(f"Scan {scan.scan_id}: {len(results)} slice/scale items, {positives} positive windows")
    return results
