"""Slice detector - 2D conv trunk with a per-anchor objectness and box-delta head"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from autonet.checkpoint import Checkpoint, load_state_into
from ctxwin.geometry import Rect, decode_deltas, encode_deltas
from ctxwin.pipeline import SliceWindows, detection_volume, rescale_channels
from ctxwin.proposals import Proposal, aggregate_detections
from ctxwin.scales import build_scales, rect_from_scale
from ctxwin.windows import POSITIVE
from utils.config import RunConfig
from volcore.volume import Box3, MultiModalScan
from .config import DetectorConfig, OUTPUTS_PER_ANCHOR
from .errors import NoDetection

logger = logging.getLogger(__name__)


class Detector(nn.Module):
    """Output (N, A*6, w, h): per anchor two objectness logits then (dx, dy, dw, dh)"""

    def __init__(self, cfg: DetectorConfig, zero_init: bool = False):
        super().__init__()
        self.cfg = cfg
        in_channels = len(cfg.modalities)
        self.trunk = nn.Sequential(
            nn.Conv2d(in_channels, cfg.channels, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(cfg.channels, cfg.channels, 3, padding=1),
            nn.ReLU(),
        )
        self.head = nn.Conv2d(cfg.channels, cfg.anchors * OUTPUTS_PER_ANCHOR, 1)
        if zero_init:
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.trunk(x))

    def split(self, out: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """(objectness logits (N, A, 2, w, h), deltas (N, A, 4, w, h))"""
        n, _, w, h = out.shape
        out = out.view(n, self.cfg.anchors, OUTPUTS_PER_ANCHOR, w, h)
        return out[:, :, :2], out[:, :, 2:]


def build_detector(cfg: DetectorConfig, zero_init: bool = False) -> Detector:
    net = Detector(cfg, zero_init)
    logger.info(f"Built detector modalities={cfg.modalities} anchors={cfg.anchor_sizes}")
    return net


def detector_from_checkpoint(checkpoint: Checkpoint) -> Detector:
    net = Detector(DetectorConfig.from_meta(checkpoint.meta))
    return load_state_into(net, checkpoint)


def anchor_rect(x: int, y: int, size: int) -> Rect:
    """Square anchor of side ``size`` centered on pixel (x, y); may extend past the slice"""
    x0 = x - (size - 1) // 2
    y0 = y - (size - 1) // 2
    return Rect(x0, y0, x0 + size - 1, y0 + size - 1)


def nearest_anchor(rect: Rect, sizes: Sequence[int]) -> int:
    side = math.sqrt(rect.area)
    return int(np.argmin([abs(side - s) for s in sizes]))


def _pixel(value: float, extent: int) -> int:
    return min(max(int(math.floor(value + 0.5)), 0), extent - 1)


@dataclass(frozen=True)
class AnchorTarget:
    """Training target at one anchor and location; deltas only for positives"""

    anchor: int
    x: int
    y: int
    label: int
    deltas: Optional[Tuple[float, float, float, float]] = None


@dataclass(frozen=True)
class DetectionSample:
    image: np.ndarray  # (C, w, h) on the scaled slice
    targets: Tuple[AnchorTarget, ...]

    @property
    def positives(self) -> int:
        return sum(t.label for t in self.targets)


def anchor_targets(item: SliceWindows, cfg: DetectorConfig) -> List[AnchorTarget]:
    """
    Map labeled proposals onto detector outputs

    Each proposal lands on the pixel of its center and the anchor closest to its
    size. A positive's gt box is recovered from its regression target and
    re-encoded against that anchor.
    """
    w, h = item.scale.scaled_dims
    targets = []
    for labeled in item.labeled:
        rect = labeled.proposal.rect
        cx, cy = rect.center
        x, y = _pixel(cx, w), _pixel(cy, h)
        anchor = nearest_anchor(rect, cfg.anchor_sizes)
        if labeled.label == POSITIVE:
            gt = decode_deltas(rect, labeled.regression_target)
            deltas = encode_deltas(anchor_rect(x, y, cfg.anchor_sizes[anchor]), gt)
            targets.append(AnchorTarget(anchor, x, y, 1, deltas))
        else:
            targets.append(AnchorTarget(anchor, x, y, 0))
    return targets


def detection_samples(items: Sequence[SliceWindows], cfg: DetectorConfig) -> List[DetectionSample]:
    """Training samples from window generation output; slices without labeled proposals are skipped"""
    samples = []
    for item in items:
        targets = anchor_targets(item, cfg)
        if targets:
            samples.append(DetectionSample(item.image.astype(np.float32), tuple(targets)))
    return samples


def detect_slice(net: Detector, image: np.ndarray, limit: Optional[int] = None) -> List[Tuple[Rect, float]]:
    """
    Scored boxes on one (scaled) slice, best first

    Args:
        net: Detector
        image: (C, w, h) input
        limit: Number of boxes returned; all anchors and locations when None

    Returns:
        (rect clipped to the slice, objectness probability) pairs
    """
    c, w, h = image.shape
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32)).unsqueeze(0)
        x = x.to(next(net.parameters()).dtype)
        logits, deltas = net.split(net(x))
        scores = F.softmax(logits[0], dim=1)[:, 1].reshape(-1).double().numpy()
        deltas = deltas[0].double().numpy()
    order = np.argsort(-scores, kind="stable")
    if limit is not None:
        order = order[:limit]
    boxes = []
    for flat in order:
        anchor, rest = divmod(int(flat), w * h)
        px, py = divmod(rest, h)
        anchor_box = anchor_rect(px, py, net.cfg.anchor_sizes[anchor])
        rect = decode_deltas(anchor_box, deltas[anchor, :, px, py], (w, h))
        boxes.append((rect, float(scores[flat])))
    return boxes


class DetectorProposalSource:
    """ProposalSource backed by a trained detector: its top ``count`` boxes"""

    def __init__(self, net: Detector, count: int = 300):
        self.net = net
        self.count = count

    def __call__(self, image, gt_boxes, scale_id, slice_z, seed):
        boxes = detect_slice(self.net, image, self.count)
        return [Proposal(rect, min(max(score, 0.0), 1.0), slice_z, scale_id) for rect, score in boxes]


def detect_scan(net: Detector, scan: MultiModalScan, config: RunConfig) -> List[Tuple[int, Rect, float]]:
    """
    Run the detector over every axial slice at every scale

    Boxes are mapped back to original slice pixels and the best
    ``detections_per_slice`` per slice are kept.
    """
    nx, ny, nz = scan.dims
    volume = detection_volume(scan, net.cfg.modalities)
    scales = build_scales((nx, ny), config.scales, tuple(config.window_size))
    detections = []
    for z in range(nz):
        found = []
        for scale in scales:
            scaled = rescale_channels(volume[:, :, :, z], scale)
            for rect, score in detect_slice(net, scaled, net.cfg.detections_per_slice):
                found.append((score, rect_from_scale(rect, scale, (nx, ny))))
        found.sort(key=lambda pair: -pair[0])
        detections.extend((z, rect, score) for score, rect in found[:net.cfg.detections_per_slice])
    return detections


def longest_slice_run(detections: Sequence[Tuple[int, Rect, float]],
                      score_floor: float) -> List[Tuple[int, Rect, float]]:
    """
    Detections on the longest run of consecutive slices that pass ``score_floor``

    Ties go to the run with the highest summed score, then the lowest z.
    """
    passing = sorted({z for z, _, score in detections if score >= score_floor})
    if not passing:
        return []
    runs, start = [], passing[0]
    for previous, current in zip(passing, passing[1:]):
        if current != previous + 1:
            runs.append((start, previous))
            start = current
    runs.append((start, passing[-1]))

    def total(run):
        lo, hi = run
        return sum(score for z, _, score in detections if lo <= z <= hi and score >= score_floor)

    lo, hi = max(runs, key=lambda run: (run[1] - run[0], total(run), -run[0]))
    return [d for d in detections if lo <= d[0] <= hi and d[2] >= score_floor]


def detect_box(net: Detector, scan: MultiModalScan, config: RunConfig) -> Box3:
    """
    3D tumor box from the longest run of slices whose detection passes the score floor

    Raises:
        NoDetection: no slice detection reaches ``net.cfg.score_floor``
    """
    detections = detect_scan(net, scan, config)
    kept = longest_slice_run(detections, net.cfg.score_floor)
    box = aggregate_detections(kept, net.cfg.score_floor)
    if box is None:
        raise NoDetection(f"scan {scan.scan_id}: no slice detection reaches score {net.cfg.score_floor}")
    logger.debug(f"Scan {scan.scan_id}: {len(kept)} of {len(detections)} slice detections kept, box {box}")
    return box
